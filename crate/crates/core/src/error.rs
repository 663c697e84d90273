use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Raised by solvers that require a stable drift matrix; see `oem::check_stability`.
    #[error(
        "unstable model: spectral abscissa {abscissa:.6e} rad/s exceeds -{margin:.3e} rad/s ({} offending eigenvalue(s))",
        offending.len()
    )]
    Unstable {
        abscissa: f64,
        margin: f64,
        offending: Vec<Complex64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
