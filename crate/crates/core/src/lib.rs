//! Steady-state Gaussian simulation of microwave entanglement swapping
//! through two opto-electro-mechanical transducers, with local certification
//! of the remote entanglement from optical modes.
//!
//! Pipeline: [`oem`] linearised model and stationary intracavity state,
//! [`spectra`] filtered output modes, [`swap`] Bell measurement and the
//! certifying condition, [`sweep`] configuration-driven parameter sweeps.

pub mod error;
pub mod gaussian;
pub mod lyapunov;
pub mod oem;
pub mod quadrature;
pub mod sampling;
pub mod spectra;
pub mod swap;
pub mod sweep;

pub use error::{Error, Result};
pub use gaussian::{CovMatrix, ModeLabel, Quadrature, Role};
pub use oem::{LinearModel, SystemParams};
pub use spectra::{FilterBank, FilterSpec, OutputCm};
pub use swap::{SiteState, SwapResult};
pub use sweep::{RunConfig, SweepRecord};
