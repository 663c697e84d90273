//! Covariance-matrix toolkit for zero-mean Gaussian states.
//!
//! Quadratures are interleaved `(X1, Y1, X2, Y2, ...)` with `a = (X + iY)/sqrt(2)`,
//! so the vacuum covariance matrix is `I/2` and a state is physical iff every
//! symplectic eigenvalue is at least `1/2`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Absolute symmetry tolerance accepted by [`CovMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance of the type-level physicality invariant.
pub const PHYSICAL_TOL: f64 = 1e-10;
/// Slack granted to numerically produced inputs (quadrature, Schur solves)
/// when an operation requires a physical state.
pub const PRECONDITION_TOL: f64 = 1e-8;
/// Relative agreement required between the two members of a `±iν` pair.
pub const PAIRING_TOL: f64 = 1e-9;
/// Relative singular-value cutoff of the conditioning pseudoinverse.
pub const PINV_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Microwave,
    Bell,
    Cert,
    Mechanical,
}

impl Role {
    pub fn symbol(self) -> char {
        match self {
            Role::Microwave => 'w',
            Role::Bell => 'b',
            Role::Cert => 'c',
            Role::Mechanical => 'm',
        }
    }
}

/// Mode identity: which site (1 or 2) and which physical role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeLabel {
    pub site: u8,
    pub role: Role,
}

impl ModeLabel {
    pub const fn new(site: u8, role: Role) -> Self {
        Self { site, role }
    }

    pub fn on_site(self, site: u8) -> Self {
        Self { site, ..self }
    }
}

pub const W1: ModeLabel = ModeLabel::new(1, Role::Microwave);
pub const B1: ModeLabel = ModeLabel::new(1, Role::Bell);
pub const C1: ModeLabel = ModeLabel::new(1, Role::Cert);
pub const M1: ModeLabel = ModeLabel::new(1, Role::Mechanical);
pub const W2: ModeLabel = ModeLabel::new(2, Role::Microwave);
pub const B2: ModeLabel = ModeLabel::new(2, Role::Bell);
pub const C2: ModeLabel = ModeLabel::new(2, Role::Cert);

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.role.symbol(), self.site)
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        let role = match chars.next() {
            Some('w') => Role::Microwave,
            Some('b') => Role::Bell,
            Some('c') => Role::Cert,
            Some('m') => Role::Mechanical,
            _ => return Err(invalid(format!("bad mode label {s:?}"))),
        };
        let site = match chars.as_str() {
            "1" => 1,
            "2" => 2,
            _ => return Err(invalid(format!("bad site in mode label {s:?}"))),
        };
        Ok(Self { site, role })
    }
}

impl Serialize for ModeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModeLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    Y,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::Y => 1,
        }
    }
}

/// The standard symplectic form `⊕ [[0, 1], [-1, 0]]` over `modes` modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymplecticForm {
    pub modes: usize,
}

impl SymplecticForm {
    pub fn new(modes: usize) -> Self {
        Self { modes }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = 2 * self.modes;
        let mut omega = DMatrix::zeros(n, n);
        for k in 0..self.modes {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        omega
    }

    /// `true` if `s` preserves the form, `S Σ Sᵀ = Σ`, within `tol` (max-abs).
    pub fn preserved_by(&self, s: &DMatrix<f64>, tol: f64) -> bool {
        let omega = self.matrix();
        if s.shape() != omega.shape() {
            return false;
        }
        (s * &omega * s.transpose() - &omega).amax() <= tol
    }
}

/// Labeled covariance matrix of a zero-mean Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct CovMatrix {
    modes: Vec<ModeLabel>,
    data: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(modes: Vec<ModeLabel>, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(invalid(format!(
                "covariance matrix must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.nrows() != 2 * modes.len() {
            return Err(invalid(format!(
                "{} mode labels need a {}x{} matrix, got {}x{}",
                modes.len(),
                2 * modes.len(),
                2 * modes.len(),
                data.nrows(),
                data.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for m in &modes {
            if !seen.insert(*m) {
                return Err(invalid(format!("duplicate mode label {m}")));
            }
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(invalid("covariance matrix has non-finite entries"));
        }
        let asym = (&data - data.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(invalid(format!(
                "covariance matrix is not symmetric (max |V - Vᵀ| = {asym:.3e})"
            )));
        }
        Ok(Self { modes, data })
    }

    /// Builds from numerically produced data, removing round-off asymmetry first.
    pub(crate) fn symmetrized(modes: Vec<ModeLabel>, data: DMatrix<f64>) -> Result<Self> {
        let sym = (&data + data.transpose()) * 0.5;
        Self::new(modes, sym)
    }

    pub fn vacuum(modes: Vec<ModeLabel>) -> Self {
        let n = 2 * modes.len();
        Self::new(modes, DMatrix::identity(n, n) * 0.5).expect("vacuum is valid")
    }

    /// Product of single-mode thermal states with symplectic eigenvalues `nu`.
    pub fn thermal(modes: Vec<ModeLabel>, nu: &[f64]) -> Result<Self> {
        if nu.len() != modes.len() {
            return Err(invalid("one symplectic eigenvalue per mode is required"));
        }
        let mut data = DMatrix::zeros(2 * nu.len(), 2 * nu.len());
        for (k, &v) in nu.iter().enumerate() {
            data[(2 * k, 2 * k)] = v;
            data[(2 * k + 1, 2 * k + 1)] = v;
        }
        Self::new(modes, data)
    }

    /// Two-mode squeezed vacuum with squeezing `r`.
    pub fn two_mode_squeezed(a: ModeLabel, b: ModeLabel, r: f64) -> Result<Self> {
        let (c, s) = ((2.0 * r).cosh() * 0.5, (2.0 * r).sinh() * 0.5);
        #[rustfmt::skip]
        let data = DMatrix::from_row_slice(4, 4, &[
            c, 0.0, s, 0.0,
            0.0, c, 0.0, -s,
            s, 0.0, c, 0.0,
            0.0, -s, 0.0, c,
        ]);
        Self::new(vec![a, b], data)
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn index_of(&self, label: ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| *m == label)
            .ok_or_else(|| invalid(format!("mode {label} not present in {}", self.describe())))
    }

    /// Reduced state on `labels`, in the order given.
    pub fn submatrix(&self, labels: &[ModeLabel]) -> Result<Self> {
        let idx = self.quadrature_indices(labels)?;
        let data = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.data[(idx[i], idx[j])]);
        Self::new(labels.to_vec(), data)
    }

    /// Direct sum; the result has zero cross-correlations.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        let (n, m) = (self.data.nrows(), other.data.nrows());
        let mut data = DMatrix::zeros(n + m, n + m);
        data.view_mut((0, 0), (n, n)).copy_from(&self.data);
        data.view_mut((n, n), (m, m)).copy_from(&other.data);
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        Self::new(modes, data)
    }

    pub fn relabeled(&self, modes: Vec<ModeLabel>) -> Result<Self> {
        Self::new(modes, self.data.clone())
    }

    /// `S V Sᵀ` for a full-size symplectic `S`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.shape() != self.data.shape() {
            return Err(invalid("transform dimension does not match the covariance matrix"));
        }
        Self::symmetrized(self.modes.clone(), s * &self.data * s.transpose())
    }

    /// Applies a 2x2 single-mode symplectic to `label`.
    pub fn with_local(&self, label: ModeLabel, s: &Matrix2<f64>) -> Result<Self> {
        let k = self.index_of(label)?;
        let n = self.data.nrows();
        let mut full = DMatrix::identity(n, n);
        full.view_mut((2 * k, 2 * k), (2, 2)).copy_from(s);
        self.transformed(&full)
    }

    pub fn is_physical(&self) -> bool {
        self.min_symplectic_eigenvalue()
            .map(|nu| nu >= 0.5 - PHYSICAL_TOL)
            .unwrap_or(false)
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(symplectic_eigenvalues(self)?[0])
    }

    pub(crate) fn require_physical(&self, tol: f64) -> Result<()> {
        let nu = self.min_symplectic_eigenvalue()?;
        if nu < 0.5 - tol {
            return Err(invalid(format!(
                "unphysical state on {}: minimum symplectic eigenvalue {nu:.12} < 1/2",
                self.describe()
            )));
        }
        Ok(())
    }

    fn quadrature_indices(&self, labels: &[ModeLabel]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(2 * labels.len());
        for &l in labels {
            let k = self.index_of(l)?;
            out.push(2 * k);
            out.push(2 * k + 1);
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        let names: Vec<String> = self.modes.iter().map(ToString::to_string).collect();
        format!("[{}]", names.join(", "))
    }
}

#[derive(Serialize, Deserialize)]
struct CovMatrixRepr {
    modes: Vec<ModeLabel>,
    data: Vec<Vec<f64>>,
}

impl Serialize for CovMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let data = self
            .data
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        CovMatrixRepr { modes: self.modes.clone(), data }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CovMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CovMatrixRepr::deserialize(d)?;
        let n = repr.data.len();
        if repr.data.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("covariance data must be a square array"));
        }
        let flat: Vec<f64> = repr.data.into_iter().flatten().collect();
        let data = DMatrix::from_row_slice(n, n, &flat);
        CovMatrix::new(repr.modes, data).map_err(serde::de::Error::custom)
    }
}

/// Symplectic spectrum of a raw `2N x 2N` matrix: the moduli of the eigenvalues
/// of `iΣV`, one per `±` pair, sorted ascending.
pub fn symplectic_spectrum(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = v.nrows();
    if !n.is_multiple_of(2) || v.ncols() != n {
        return Err(invalid("symplectic spectrum needs an even square matrix"));
    }
    let omega = SymplecticForm::new(n / 2).matrix();
    let schur = Schur::try_new(&omega * v, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("eigen-solver failed to converge on iΣV".into()))?;
    let mut moduli: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n / 2);
    for pair in moduli.chunks(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo > PAIRING_TOL * hi.max(1.0) {
            return Err(Error::Numerical(format!(
                "symplectic eigenvalues failed to pair: {lo:.15e} vs {hi:.15e}"
            )));
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

pub fn symplectic_eigenvalues(v: &CovMatrix) -> Result<Vec<f64>> {
    symplectic_spectrum(v.data())
}

/// Time reversal of the listed modes: their `Y` rows and columns change sign.
pub fn partial_transpose(v: &CovMatrix, modes_to_transpose: &[ModeLabel]) -> Result<CovMatrix> {
    let mut data = v.data().clone();
    let n = data.nrows();
    for &label in modes_to_transpose {
        let y = 2 * v.index_of(label)? + 1;
        for j in 0..n {
            data[(y, j)] = -data[(y, j)];
        }
        for i in 0..n {
            data[(i, y)] = -data[(i, y)];
        }
    }
    CovMatrix::new(v.modes().to_vec(), data)
}

/// `max{0, -ln(2η₋)}` with `η₋` the smallest symplectic eigenvalue of the
/// partial transpose taken on the second side of `bipartition`.
pub fn log_negativity(v: &CovMatrix, bipartition: (&[ModeLabel], &[ModeLabel])) -> Result<f64> {
    let (left, right) = bipartition;
    if left.is_empty() || right.is_empty() {
        return Err(invalid("both sides of a bipartition must be non-empty"));
    }
    let mut covered = HashSet::new();
    for m in left.iter().chain(right) {
        v.index_of(*m)?;
        if !covered.insert(*m) {
            return Err(invalid(format!("mode {m} appears twice in the bipartition")));
        }
    }
    if covered.len() != v.num_modes() {
        return Err(invalid("bipartition does not cover every mode"));
    }
    v.require_physical(PRECONDITION_TOL)?;
    let eta = partial_transpose(v, right)?.min_symplectic_eigenvalue()?;
    Ok(negativity_from_eta(eta))
}

pub fn negativity_from_eta(eta: f64) -> f64 {
    (-(2.0 * eta).ln()).max(0.0)
}

/// `Tr ρ² = (2^N sqrt(det V))⁻¹`.
pub fn purity(v: &CovMatrix) -> Result<f64> {
    let det = v.data().determinant();
    if !(det > 0.0) {
        return Err(invalid(format!("non-positive determinant {det:.3e}: state is unphysical")));
    }
    v.require_physical(PRECONDITION_TOL)?;
    Ok(1.0 / (2f64.powi(v.num_modes() as i32) * det.sqrt()))
}

/// Balanced beam splitter `(a, b) -> ((a + b)/sqrt 2, (b - a)/sqrt 2)`.
pub fn beamsplitter_apply(v: &CovMatrix, mode_a: ModeLabel, mode_b: ModeLabel) -> Result<CovMatrix> {
    if mode_a == mode_b {
        return Err(invalid(format!("beam splitter needs two distinct modes, got {mode_a} twice")));
    }
    let (ia, ib) = (v.index_of(mode_a)?, v.index_of(mode_b)?);
    let n = v.data().nrows();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut s = DMatrix::identity(n, n);
    for q in 0..2 {
        let (a, b) = (2 * ia + q, 2 * ib + q);
        s[(a, a)] = h;
        s[(a, b)] = h;
        s[(b, a)] = -h;
        s[(b, b)] = h;
    }
    v.transformed(&s)
}

/// Conditional state after homodyne detection of one quadrature on each listed
/// mode. Outcome-independent; the measured modes are removed.
pub fn homodyne_condition(v: &CovMatrix, measurements: &[(ModeLabel, Quadrature)]) -> Result<CovMatrix> {
    let mut measured = HashSet::new();
    let mut m_idx = Vec::with_capacity(measurements.len());
    for &(label, q) in measurements {
        if !measured.insert(label) {
            return Err(invalid(format!("mode {label} is measured more than once")));
        }
        m_idx.push(2 * v.index_of(label)? + q.offset());
    }
    let retained: Vec<ModeLabel> = v.modes().iter().copied().filter(|m| !measured.contains(m)).collect();
    if retained.is_empty() {
        return Err(invalid("homodyne conditioning would leave no modes"));
    }
    let r_idx = v.quadrature_indices(&retained)?;
    let d = v.data();
    let vr = DMatrix::from_fn(r_idx.len(), r_idx.len(), |i, j| d[(r_idx[i], r_idx[j])]);
    let vrm = DMatrix::from_fn(r_idx.len(), m_idx.len(), |i, j| d[(r_idx[i], m_idx[j])]);
    let vm = DMatrix::from_fn(m_idx.len(), m_idx.len(), |i, j| d[(m_idx[i], m_idx[j])]);
    let vm_pinv = pseudo_inverse_rel(&vm, PINV_RTOL)?;
    let cond = vr - &vrm * vm_pinv * vrm.transpose();
    CovMatrix::symmetrized(retained, cond)
}

fn pseudo_inverse_rel(m: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rtol * smax;
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD without U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD without Vᵀ".into()))?;
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > cutoff && sv > 0.0 {
            out += vt.row(k).transpose() * u.column(k).transpose() / sv;
        }
    }
    Ok(out)
}

/// Two-mode state in standard form together with the local symplectic used.
#[derive(Clone, Debug)]
pub struct StandardForm {
    /// `[[a I, diag(c₊, c₋)], [diag(c₊, c₋), b I]]` with `c₊ ≥ |c₋|`.
    pub cm: CovMatrix,
    /// Block-diagonal `S_A ⊕ S_B` with `cm = S V Sᵀ`.
    pub local: DMatrix<f64>,
    pub local_a: Matrix2<f64>,
    pub local_b: Matrix2<f64>,
}

fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Single-mode symplectic `S` with `S V Sᵀ = sqrt(det V)·I`.
fn single_mode_normalizer(block: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = block.determinant();
    if !(det > 0.0) || block[(0, 0)] <= 0.0 {
        return Err(invalid("local block is not positive definite"));
    }
    let scale = block.amax();
    if (block[(0, 1)]).abs() <= 1e-15 * scale && (block[(0, 0)] - block[(1, 1)]).abs() <= 1e-15 * scale {
        return Ok(Matrix2::identity());
    }
    let theta = 0.5 * (2.0 * block[(0, 1)]).atan2(block[(0, 0)] - block[(1, 1)]);
    let r = rotation(theta);
    let diag = r.transpose() * block * r;
    let a = det.sqrt();
    let squeeze = Matrix2::new((a / diag[(0, 0)]).sqrt(), 0.0, 0.0, (a / diag[(1, 1)]).sqrt());
    Ok(squeeze * r.transpose())
}

/// Rotations `(left, right)` and signed singular values `(σ₊, σ₋)` with
/// `m = left · diag(σ₊, σ₋) · right` and `σ₊ ≥ |σ₋|`.
fn rotational_svd(m: &Matrix2<f64>) -> (Matrix2<f64>, (f64, f64), Matrix2<f64>) {
    let e = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let f = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let g = 0.5 * (m[(1, 0)] + m[(0, 1)]);
    let h = 0.5 * (m[(1, 0)] - m[(0, 1)]);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    let theta = 0.5 * (a2 - a1);
    let phi = 0.5 * (a2 + a1);
    (rotation(phi), (q + r, q - r), rotation(theta))
}

pub fn standard_form_two_mode(v: &CovMatrix) -> Result<StandardForm> {
    if v.num_modes() != 2 {
        return Err(invalid(format!(
            "standard form needs a two-mode state, got {} modes",
            v.num_modes()
        )));
    }
    let d = v.data();
    let block = |r: usize, c: usize| Matrix2::new(d[(r, c)], d[(r, c + 1)], d[(r + 1, c)], d[(r + 1, c + 1)]);
    let sa = single_mode_normalizer(&block(0, 0))?;
    let sb = single_mode_normalizer(&block(2, 2))?;
    let cross = sa * block(0, 2) * sb.transpose();
    let scale = cross.amax().max(d.amax());
    let (ra, rb) = if cross[(0, 1)].abs() <= 1e-15 * scale && cross[(1, 0)].abs() <= 1e-15 * scale {
        (Matrix2::identity(), Matrix2::identity())
    } else {
        let (left, _, right) = rotational_svd(&cross);
        (left.transpose(), right)
    };
    let local_a = ra * sa;
    let local_b = rb * sb;
    let mut local = DMatrix::zeros(4, 4);
    local.view_mut((0, 0), (2, 2)).copy_from(&local_a);
    local.view_mut((2, 2), (2, 2)).copy_from(&local_b);
    let cm = v.transformed(&local)?;
    Ok(StandardForm { cm, local, local_a, local_b })
}
