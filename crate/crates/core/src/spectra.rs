//! Stationary covariance matrix of the filtered cavity output modes.
//!
//! Fourier convention `f̃(ω) = ∫ dt e^{iωt} f(t)`. Each output
//! `a_out = √(2κ) a - a_in` is convolved with the causal filter
//! `h(t) = √(2/τ) Θ(t) exp[(-1/τ - iΩ) t]`, so a filter centred at `Ω`
//! selects components oscillating as `e^{-iΩt}` in the drive frame.
//!
//! Two independent routes produce the 6x6 matrix over `(b, c, w)`:
//! [`output_cm`] integrates the symmetrized output spectra over frequency, and
//! [`output_cm_cascaded_oracle`] realises each filter as an auxiliary damped
//! mode driven by the output field and solves the enlarged Lyapunov equation.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{CovMatrix, B1, C1, W1};
use crate::lyapunov;
use crate::oem::{check_stability, Channel, LinearModel};
use crate::quadrature::{self, Tolerance};

pub const QUAD_TOL: Tolerance = Tolerance { abs: 1e-12, rel: 1e-9 };
const MAX_INTERVALS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Inverse bandwidth τ (s).
    pub tau: f64,
    /// Central frequency Ω (rad/s) in the drive frame.
    pub center: f64,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid(format!("filter tau must be positive, got {}", self.tau)));
        }
        if !self.center.is_finite() {
            return Err(invalid("filter center must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub bell: FilterSpec,
    pub cert: FilterSpec,
    pub microwave: FilterSpec,
}

impl FilterBank {
    /// Common `τ` for every channel, each filter centred on its cavity detuning.
    pub fn centered_on_detunings(model: &LinearModel, tau: f64) -> Self {
        let f = |ch: Channel| FilterSpec { tau, center: model.detuning[ch.index()] };
        Self { bell: f(Channel::Bell), cert: f(Channel::Cert), microwave: f(Channel::Microwave) }
    }

    pub fn get(&self, ch: Channel) -> &FilterSpec {
        match ch {
            Channel::Bell => &self.bell,
            Channel::Cert => &self.cert,
            Channel::Microwave => &self.microwave,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Channel::ALL.iter().try_for_each(|c| self.get(*c).validate())
    }
}

/// `h̃(ω) = √(2/τ) / (1/τ - i(ω - Ω))`; `∫ |h̃|² dω/2π = 1`.
pub fn filter_transfer(f: &FilterSpec, omega: f64) -> Complex64 {
    let rate = 1.0 / f.tau;
    Complex64::new((2.0 * rate).sqrt(), 0.0) / Complex64::new(rate, -(omega - f.center))
}

/// `(-iω I - A)⁻¹` for an arbitrary real drift matrix.
pub fn resolvent(drift: &DMatrix<f64>, omega: f64) -> Result<DMatrix<Complex64>> {
    let n = drift.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { Complex64::new(0.0, -omega) } else { Complex64::new(0.0, 0.0) };
        diag - drift[(i, j)]
    });
    m.try_inverse()
        .ok_or_else(|| Error::Numerical(format!("-iωI - A is singular at ω = {omega:e}")))
}

#[derive(Clone, Debug)]
pub struct FrequencyResponse {
    /// `M(ω) = (-iω I - A)⁻¹` (8x8), intracavity response to the injected noise `n`.
    pub resolvent: DMatrix<Complex64>,
    /// `T(ω) = K M(ω) N - P` (6x8): unfiltered output quadratures
    /// `(X_b, Y_b, X_c, Y_c, X_w, Y_w)^out` from the input noise vector `z`.
    pub output: DMatrix<Complex64>,
}

pub fn frequency_transfer(m: &LinearModel, omega: f64) -> Result<FrequencyResponse> {
    let resolvent = resolvent(&m.drift, omega)?;
    let output = output_transfer(m, &resolvent);
    Ok(FrequencyResponse { resolvent, output })
}

fn output_transfer(m: &LinearModel, resolvent: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut t = DMatrix::zeros(6, 8);
    for ch in Channel::ALL {
        let off = ch.quadrature_offset();
        let gain = (2.0 * m.kappa[ch.index()]).sqrt();
        for q in 0..2 {
            let row = 2 * ch.index() + q;
            for j in 0..8 {
                t[(row, j)] = resolvent[(off + q, j)] * (gain * m.noise_gain[j]);
            }
            t[(row, off + q)] -= Complex64::new(1.0, 0.0);
        }
    }
    t
}

/// Quadrature-basis action of a filter that is diagonal on `(a, a†)`:
/// `a_sel(ω) = h̃(ω) a_out(ω)` and `a_sel†(ω) = h̃(-ω)* a_out†(ω)`.
fn quadrature_filter(f: &FilterSpec, omega: f64) -> [[Complex64; 2]; 2] {
    let h1 = filter_transfer(f, omega);
    let h2 = filter_transfer(f, -omega).conj();
    let i = Complex64::i();
    // U⁻¹ diag(h1, h2) U with (a, a†) = U (X, Y), U = [[1, i], [1, -i]]/√2.
    let sum = (h1 + h2) * 0.5;
    let diff = (h1 - h2) * 0.5;
    [[sum, i * diff], [-i * diff, sum]]
}

/// Upper-triangle index pairs of a 6x6 matrix.
fn upper_pairs() -> Vec<(usize, usize)> {
    (0..6).flat_map(|i| (i..6).map(move |j| (i, j))).collect()
}

/// `Re[Q S Q†](ω)` with `Q = F(ω) T(ω)`, packed as the 21 upper-triangle entries.
fn spectral_density(m: &LinearModel, filters: &FilterBank, omega: f64) -> Result<Vec<f64>> {
    let resp = frequency_transfer(m, omega)?;
    let mut q = DMatrix::<Complex64>::zeros(6, 8);
    for ch in Channel::ALL {
        let f = quadrature_filter(filters.get(ch), omega);
        let r = 2 * ch.index();
        for j in 0..8 {
            let (x, y) = (resp.output[(r, j)], resp.output[(r + 1, j)]);
            q[(r, j)] = f[0][0] * x + f[0][1] * y;
            q[(r + 1, j)] = f[1][0] * x + f[1][1] * y;
        }
    }
    let s = &m.noise_density;
    Ok(upper_pairs()
        .into_iter()
        .map(|(i, k)| {
            (0..8)
                .map(|j| (q[(i, j)] * q[(k, j)].conj()).re * s[j])
                .sum::<f64>()
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegrationDiagnostics {
    pub method: &'static str,
    /// Half-width `W` of the explicitly resolved window (rad/s); the tail
    /// beyond it is integrated through `ω = W/t`.
    pub window: f64,
    pub max_error_estimate: f64,
    pub evaluations: usize,
    pub intervals: usize,
    pub min_symplectic_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputCm {
    /// Over `(b1, c1, w1)`.
    pub cm: CovMatrix,
    pub filters: FilterBank,
    pub diagnostics: IntegrationDiagnostics,
}

fn window(m: &LinearModel, filters: &FilterBank) -> f64 {
    let max_center = Channel::ALL.iter().map(|c| filters.get(*c).center.abs()).fold(0.0, f64::max);
    let min_tau = Channel::ALL.iter().map(|c| filters.get(*c).tau).fold(f64::INFINITY, f64::min);
    let max_kappa = m.kappa.iter().copied().fold(0.0, f64::max);
    max_center + (40.0 / min_tau).max(20.0 * max_kappa).max(4.0 * m.omega_m)
}

fn breakpoints(m: &LinearModel, filters: &FilterBank, w: f64) -> Vec<f64> {
    let mut pts = vec![0.0, w, 2.0 * w, m.omega_m];
    for ch in Channel::ALL {
        let f = filters.get(ch);
        for k in [-25.0, -5.0, -1.0, 0.0, 1.0, 5.0, 25.0] {
            pts.push(f.center.abs() + k / f.tau);
        }
        pts.push(m.detuning[ch.index()].abs());
    }
    pts.retain(|x| (0.0..=2.0 * w).contains(x));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * w);
    pts
}

/// Frequency-domain route. The integrand is even in `ω`, so only `ω ≥ 0` is
/// integrated; `[W, ∞)` is folded into `s ∈ [W, 2W]` by `ω = W²/(2W - s)`.
pub fn output_cm(m: &LinearModel, filters: &FilterBank) -> Result<OutputCm> {
    filters.validate()?;
    check_stability(m)?.require_stable()?;
    let w = window(m, filters);
    let breaks = breakpoints(m, filters, w);
    let integrand = |s: f64| -> Vec<f64> {
        let (omega, jac) = if s <= w {
            (s, 1.0)
        } else {
            let t = (2.0 * w - s) / w;
            (w / t, 1.0 / (t * t))
        };
        match spectral_density(m, filters, omega) {
            Ok(v) => v.into_iter().map(|x| x * jac / std::f64::consts::PI).collect(),
            Err(_) => vec![f64::NAN; 21],
        }
    };
    let res = quadrature::integrate(integrand, &breaks, 21, QUAD_TOL, MAX_INTERVALS)?;
    if res.value.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("output spectrum evaluation produced non-finite values".into()));
    }
    let mut data = DMatrix::zeros(6, 6);
    for (k, (i, j)) in upper_pairs().into_iter().enumerate() {
        data[(i, j)] = res.value[k];
        data[(j, i)] = res.value[k];
    }
    let cm = CovMatrix::new(vec![B1, C1, W1], data)?;
    let diagnostics = IntegrationDiagnostics {
        method: "spectral",
        window: w,
        max_error_estimate: res.error.iter().copied().fold(0.0, f64::max),
        evaluations: res.evaluations,
        intervals: res.intervals,
        min_symplectic_eigenvalue: cm.min_symplectic_eigenvalue()?,
    };
    Ok(OutputCm { cm, filters: *filters, diagnostics })
}

/// Cascaded-mode route: filter `x` is the mode `ȧ_f = -(1/τ + iΩ) a_f + √(2/τ) a_out`,
/// whose stationary state is exactly the filtered output.
pub fn output_cm_cascaded_oracle(m: &LinearModel, filters: &FilterBank) -> Result<OutputCm> {
    filters.validate()?;
    check_stability(m)?.require_stable()?;
    let n = 14;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (8, 8)).copy_from(&m.drift);
    // Injection of z: the filters see the reflected input -a_in directly.
    let mut b = DMatrix::zeros(n, 8);
    for j in 0..8 {
        b[(j, j)] = m.noise_gain[j];
    }
    for ch in Channel::ALL {
        let f = filters.get(ch);
        let rate = 1.0 / f.tau;
        let root = (2.0 * rate).sqrt();
        let cav = ch.quadrature_offset();
        let fil = 8 + 2 * ch.index();
        let block = Matrix2::new(-rate, f.center, -f.center, -rate);
        a.view_mut((fil, fil), (2, 2)).copy_from(&block);
        let gain = root * (2.0 * m.kappa[ch.index()]).sqrt();
        for q in 0..2 {
            a[(fil + q, cav + q)] = gain;
            b[(fil + q, cav + q)] = -root;
        }
    }
    let s = DMatrix::from_diagonal(&m.noise_density);
    let d = &b * s * b.transpose();
    let v = lyapunov::solve_continuous(&a, &d)?;
    let block = v.view((8, 8), (6, 6)).clone_owned();
    let cm = CovMatrix::symmetrized(vec![B1, C1, W1], block)?;
    let res = lyapunov::residual(&a, &v, &d);
    let diagnostics = IntegrationDiagnostics {
        method: "cascaded",
        window: f64::INFINITY,
        max_error_estimate: res.norm() / d.norm(),
        evaluations: 0,
        intervals: 0,
        min_symplectic_eigenvalue: cm.min_symplectic_eigenvalue()?,
    };
    Ok(OutputCm { cm, filters: *filters, diagnostics })
}
