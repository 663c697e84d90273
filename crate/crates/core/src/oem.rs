//! Linearized opto-electro-mechanical site: one mechanical resonator coupled
//! to two optical cavity modes (Bell `b`, certifying `c`) and one microwave
//! cavity mode (`w`).
//!
//! Fluctuation vector `u = (q, p, X_b, Y_b, X_c, Y_c, X_w, Y_w)` obeys
//! `du/dt = A u + N z`, where `z = (0, ξ, X_b^in, Y_b^in, ...)` collects the
//! white input noises with symmetrized spectral density `S = diag(...)`, so the
//! diffusion matrix is `D = N S N`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{CovMatrix, B1, C1, M1, W1};
use crate::lyapunov;

pub const HBAR: f64 = 1.054571817e-34;
pub const K_B: f64 = 1.380649e-23;
pub const C_LIGHT: f64 = 2.99792458e8;

/// Stability margin relative to `omega_m`.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Driven cavity channels in fluctuation-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Bell,
    Cert,
    Microwave,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Bell, Channel::Cert, Channel::Microwave];

    pub fn index(self) -> usize {
        match self {
            Channel::Bell => 0,
            Channel::Cert => 1,
            Channel::Microwave => 2,
        }
    }

    /// Row of `X_x` in the fluctuation vector.
    pub fn quadrature_offset(self) -> usize {
        2 + 2 * self.index()
    }
}

/// Per-cavity configuration, SI units with angular frequencies in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Drive wavelength (m).
    pub wavelength: f64,
    /// Drive power (W).
    pub power: f64,
    /// Amplitude decay rate (rad/s).
    pub kappa: f64,
    /// Effective detuning Δ (rad/s).
    pub detuning: f64,
    /// Single-photon coupling (rad/s).
    pub g: f64,
}

impl CavityParams {
    pub fn drive_frequency(&self) -> f64 {
        std::f64::consts::TAU * C_LIGHT / self.wavelength
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    pub q_m: f64,
    /// Effective mass (kg); informational, couplings are given directly.
    pub mass: f64,
    /// Bath temperature (K), shared by all reservoirs.
    pub temperature: f64,
    pub bell: CavityParams,
    pub cert: CavityParams,
    pub microwave: CavityParams,
}

impl SystemParams {
    /// Reference transducer: 10 MHz membrane of 10 ng with Q = 1.5e5, optical
    /// modes near 810 nm, a 10 GHz microwave mode, all cavities at κ = ω_m/4.
    pub fn reference() -> Self {
        let omega_m = std::f64::consts::TAU * 10e6;
        let two_pi = std::f64::consts::TAU;
        let kappa = 0.25 * omega_m;
        Self {
            omega_m,
            q_m: 1.5e5,
            mass: 10e-12,
            temperature: 0.05,
            bell: CavityParams {
                wavelength: 810.000e-9,
                power: 2.0e-3,
                kappa,
                detuning: -omega_m,
                g: two_pi * 152.0,
            },
            cert: CavityParams {
                wavelength: 810.328e-9,
                power: 2.1e-3,
                kappa,
                detuning: omega_m,
                g: two_pi * 152.0,
            },
            microwave: CavityParams {
                wavelength: 29.979e-3,
                power: 35e-3,
                kappa,
                detuning: omega_m,
                g: two_pi * 0.266,
            },
        }
    }

    pub fn cavity(&self, ch: Channel) -> &CavityParams {
        match ch {
            Channel::Bell => &self.bell,
            Channel::Cert => &self.cert,
            Channel::Microwave => &self.microwave,
        }
    }

    pub fn cavity_mut(&mut self, ch: Channel) -> &mut CavityParams {
        match ch {
            Channel::Bell => &mut self.bell,
            Channel::Cert => &mut self.cert,
            Channel::Microwave => &mut self.microwave,
        }
    }

    pub fn gamma_m(&self) -> f64 {
        self.omega_m / self.q_m
    }

    pub fn validate(&self) -> Result<()> {
        let finite_positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        finite_positive("omega_m", self.omega_m)?;
        finite_positive("mass", self.mass)?;
        if !(self.q_m.is_finite() && self.q_m > 1.0) {
            return Err(invalid(format!("q_m must exceed 1, got {}", self.q_m)));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid(format!("temperature must be non-negative, got {}", self.temperature)));
        }
        for ch in Channel::ALL {
            let c = self.cavity(ch);
            let name = format!("{ch:?}").to_lowercase();
            finite_positive(&format!("{name}.wavelength"), c.wavelength)?;
            finite_positive(&format!("{name}.kappa"), c.kappa)?;
            if !(c.power.is_finite() && c.power >= 0.0) {
                return Err(invalid(format!("{name}.power must be non-negative, got {}", c.power)));
            }
            if !(c.g.is_finite() && c.g >= 0.0) {
                return Err(invalid(format!("{name}.g must be non-negative, got {}", c.g)));
            }
            if !c.detuning.is_finite() {
                return Err(invalid(format!("{name}.detuning must be finite")));
            }
        }
        Ok(())
    }
}

/// Bose occupancy at angular frequency `omega`; zero at `T = 0`.
pub fn thermal_occupancy(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// Semiclassical steady state and rates derived from [`SystemParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub gamma_m: f64,
    /// Drive rates `E_x` (rad/s), channel order.
    pub drive: [f64; 3],
    /// Intracavity amplitudes `⟨a_x⟩ = E_x / (κ_x + iΔ_x)`.
    pub amplitude: [Complex64; 3],
    /// Effective couplings `G_x = √2 g_x |⟨a_x⟩|` (rad/s); the phase of
    /// `⟨a_x⟩` is absorbed into the cavity quadrature frame.
    pub coupling: [f64; 3],
    pub nbar_m: f64,
    /// Reservoir occupancy per channel; optical reservoirs are taken as empty.
    pub nbar: [f64; 3],
    /// Static displacement `⟨q⟩ = Σ g_x |⟨a_x⟩|² / ω_m`, diagnostic only.
    pub mean_position: f64,
}

pub fn derive_rates(p: &SystemParams) -> Result<DerivedRates> {
    p.validate()?;
    let mut drive = [0.0; 3];
    let mut amplitude = [Complex64::new(0.0, 0.0); 3];
    let mut coupling = [0.0; 3];
    let mut nbar = [0.0; 3];
    let mut mean_position = 0.0;
    for ch in Channel::ALL {
        let c = p.cavity(ch);
        let k = ch.index();
        let omega0 = c.drive_frequency();
        drive[k] = (2.0 * c.power * c.kappa / (HBAR * omega0)).sqrt();
        amplitude[k] = Complex64::new(drive[k], 0.0) / Complex64::new(c.kappa, c.detuning);
        coupling[k] = std::f64::consts::SQRT_2 * c.g * amplitude[k].norm();
        mean_position += c.g * amplitude[k].norm_sqr() / p.omega_m;
        if ch == Channel::Microwave {
            nbar[k] = thermal_occupancy(omega0, p.temperature);
        }
    }
    Ok(DerivedRates {
        gamma_m: p.gamma_m(),
        drive,
        amplitude,
        coupling,
        nbar_m: thermal_occupancy(p.omega_m, p.temperature),
        nbar,
        mean_position,
    })
}

/// Drift matrix of the linearized fluctuations.
pub fn build_drift(r: &DerivedRates, p: &SystemParams) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(8, 8);
    a[(0, 1)] = p.omega_m;
    a[(1, 0)] = -p.omega_m;
    a[(1, 1)] = -r.gamma_m;
    for ch in Channel::ALL {
        let c = p.cavity(ch);
        let (x, y) = (ch.quadrature_offset(), ch.quadrature_offset() + 1);
        let g = r.coupling[ch.index()];
        a[(x, x)] = -c.kappa;
        a[(x, y)] = c.detuning;
        a[(y, x)] = -c.detuning;
        a[(y, y)] = -c.kappa;
        a[(1, x)] = g;
        a[(y, 0)] = g;
    }
    a
}

/// Noise injection gains `N` (diagonal): `0, 1, √(2κ_x)` per quadrature.
fn noise_gain(p: &SystemParams) -> DVector<f64> {
    let mut n = DVector::zeros(8);
    n[1] = 1.0;
    for ch in Channel::ALL {
        let g = (2.0 * p.cavity(ch).kappa).sqrt();
        n[ch.quadrature_offset()] = g;
        n[ch.quadrature_offset() + 1] = g;
    }
    n
}

/// Symmetrized spectral density of `z`: `γ_m(2n̄_m + 1)` for ξ and
/// `n̄_x + 1/2` for each input quadrature.
fn noise_density(r: &DerivedRates) -> DVector<f64> {
    let mut s = DVector::zeros(8);
    s[1] = r.gamma_m * (2.0 * r.nbar_m + 1.0);
    for ch in Channel::ALL {
        let v = r.nbar[ch.index()] + 0.5;
        s[ch.quadrature_offset()] = v;
        s[ch.quadrature_offset() + 1] = v;
    }
    s
}

/// `D = diag(0, γ_m(2n̄_m+1), κ_b, κ_b, κ_c, κ_c, κ_w(2n̄_w+1), κ_w(2n̄_w+1))`.
pub fn build_diffusion(r: &DerivedRates, p: &SystemParams) -> DMatrix<f64> {
    let n = noise_gain(p);
    let s = noise_density(r);
    DMatrix::from_diagonal(&n.component_mul(&n).component_mul(&s))
}

#[derive(Clone, Debug)]
pub struct LinearModel {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    /// Diagonal of the injection matrix `N`.
    pub noise_gain: DVector<f64>,
    /// Diagonal of the input spectral density `S`.
    pub noise_density: DVector<f64>,
    pub kappa: [f64; 3],
    pub detuning: [f64; 3],
    pub omega_m: f64,
    pub rates: DerivedRates,
}

impl LinearModel {
    pub fn from_params(p: &SystemParams) -> Result<Self> {
        let rates = derive_rates(p)?;
        Ok(Self {
            drift: build_drift(&rates, p),
            diffusion: build_diffusion(&rates, p),
            noise_gain: noise_gain(p),
            noise_density: noise_density(&rates),
            kappa: Channel::ALL.map(|c| p.cavity(c).kappa),
            detuning: Channel::ALL.map(|c| p.cavity(c).detuning),
            omega_m: p.omega_m,
            rates,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part among the drift eigenvalues (rad/s).
    pub spectral_abscissa: f64,
    pub margin: f64,
    pub stable: bool,
}

impl StabilityReport {
    /// Eigenvalues violating `Re λ < -margin`.
    pub fn offending(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().copied().filter(|z| z.re >= -self.margin).collect()
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.stable {
            Ok(())
        } else {
            Err(Error::Unstable {
                abscissa: self.spectral_abscissa,
                margin: self.margin,
                offending: self.offending(),
            })
        }
    }
}

pub fn check_stability(m: &LinearModel) -> Result<StabilityReport> {
    let schur = nalgebra::linalg::Schur::try_new(m.drift.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("drift eigenvalues did not converge".into()))?;
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let spectral_abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let margin = STABILITY_MARGIN * m.omega_m;
    Ok(StabilityReport {
        stable: spectral_abscissa < -margin,
        eigenvalues,
        spectral_abscissa,
        margin,
    })
}

/// Stationary 8x8 covariance matrix of `(m, b, c, w)` solving `A V + V Aᵀ + D = 0`.
pub fn solve_lyapunov(m: &LinearModel) -> Result<CovMatrix> {
    check_stability(m)?.require_stable()?;
    let v = lyapunov::solve_continuous(&m.drift, &m.diffusion)?;
    CovMatrix::symmetrized(vec![M1, B1, C1, W1], v)
}
