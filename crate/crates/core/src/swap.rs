//! Entanglement swapping between two identical sites and local certification.
//!
//! Each site holds `(w, b, c)`. Charlie mixes `b₁` and `b₂` on a balanced
//! beam splitter and measures `X` of `(b₁+b₂)/√2` and `Y` of `(b₂-b₁)/√2`.
//! The conditional state of `(w₁, w₂, c₁, c₂)` does not depend on the
//! outcomes, so feed-forward gains are not modelled.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::gaussian::{
    beamsplitter_apply, homodyne_condition, negativity_from_eta, partial_transpose, purity,
    standard_form_two_mode, CovMatrix, ModeLabel, Quadrature, B1, B2, C1, C2, PRECONDITION_TOL, W1, W2,
};
use crate::spectra::OutputCm;

/// Margin on every strict inequality entering a verdict.
pub const VERDICT_MARGIN: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SiteState {
    cm: CovMatrix,
}

impl SiteState {
    /// Accepts any CM carrying exactly the labels `w1, b1, c1`; they are reordered.
    pub fn new(cm: &CovMatrix) -> Result<Self> {
        if cm.num_modes() != 3 {
            return Err(invalid(format!("a site has three modes, got {}", cm.num_modes())));
        }
        let cm = cm.submatrix(&[W1, B1, C1])?;
        cm.require_physical(PRECONDITION_TOL)?;
        Ok(Self { cm })
    }

    pub fn from_output(out: &OutputCm) -> Result<Self> {
        Self::new(&out.cm)
    }

    pub fn cm(&self) -> &CovMatrix {
        &self.cm
    }

    /// Applies local single-mode symplectics (identity where `None`).
    fn gauged(&self, w: Option<&nalgebra::Matrix2<f64>>, b: Option<&nalgebra::Matrix2<f64>>, c: Option<&nalgebra::Matrix2<f64>>) -> Result<Self> {
        let mut cm = self.cm.clone();
        for (label, s) in [(W1, w), (B1, b), (C1, c)] {
            if let Some(s) = s {
                cm = cm.with_local(label, s)?;
            }
        }
        Ok(Self { cm })
    }

    /// Rotates the `(w, b)` pair into two-mode standard form.
    pub fn wb_gauge(&self) -> Result<Self> {
        let sf = standard_form_two_mode(&self.cm.submatrix(&[W1, B1])?)?;
        self.gauged(Some(&sf.local_a), Some(&sf.local_b), None)
    }

    /// Rotates the `(b, c)` pair into two-mode standard form.
    pub fn bc_gauge(&self) -> Result<Self> {
        let sf = standard_form_two_mode(&self.cm.submatrix(&[B1, C1])?)?;
        self.gauged(None, Some(&sf.local_a), Some(&sf.local_b))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoSiteState {
    cm: CovMatrix,
}

impl TwoSiteState {
    pub fn cm(&self) -> &CovMatrix {
        &self.cm
    }
}

pub fn assemble_two_site(site: &SiteState) -> Result<TwoSiteState> {
    let second = site.cm.relabeled(vec![W2, B2, C2])?;
    Ok(TwoSiteState { cm: site.cm.direct_sum(&second)? })
}

/// Conditional CM over `(w₁, w₂, c₁, c₂)`.
pub fn bell_measure(s: &TwoSiteState) -> Result<CovMatrix> {
    let mixed = beamsplitter_apply(&s.cm, B1, B2)?;
    let cond = homodyne_condition(&mixed, &[(B1, Quadrature::X), (B2, Quadrature::Y)])?;
    let out = cond.submatrix(&[W1, W2, C1, C2])?;
    out.require_physical(PRECONDITION_TOL)?;
    Ok(out)
}

/// Smallest symplectic eigenvalue of the partial transpose on `(a | b)`.
fn pt_eta(v: &CovMatrix, a: ModeLabel, b: ModeLabel) -> Result<f64> {
    partial_transpose(&v.submatrix(&[a, b])?, &[b])?.min_symplectic_eigenvalue()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PurityShortcut {
    pub mu_b: f64,
    pub mu_wb: f64,
    pub mu_bc: f64,
    pub eta_ww: f64,
    pub eta_cc: f64,
}

pub fn purity_shortcut(site: &SiteState) -> Result<PurityShortcut> {
    let mu_b = purity(&site.cm.submatrix(&[B1])?)?;
    let mu_wb = purity(&site.cm.submatrix(&[W1, B1])?)?;
    let mu_bc = purity(&site.cm.submatrix(&[B1, C1])?)?;
    Ok(PurityShortcut { mu_b, mu_wb, mu_bc, eta_ww: mu_b / (2.0 * mu_wb), eta_cc: mu_b / (2.0 * mu_bc) })
}

#[derive(Clone, Debug, Serialize)]
pub struct SwapResult {
    /// Raw conditional state over `(w₁, w₂, c₁, c₂)`, no gauge applied.
    pub v_out: CovMatrix,
    /// From the explicit route, each pair evaluated in its standard-form gauge.
    pub en_ww: f64,
    pub en_cc: f64,
    pub eta_ww: f64,
    pub eta_cc: f64,
    /// Explicit route on the site exactly as given.
    pub eta_ww_raw: f64,
    pub eta_cc_raw: f64,
    pub en_ww_raw: f64,
    pub en_cc_raw: f64,
    pub eta_ww_shortcut: f64,
    pub eta_cc_shortcut: f64,
    pub mu_b: f64,
    pub mu_wb: f64,
    pub mu_bc: f64,
    /// `|η(gauged explicit) - η(shortcut)|`.
    pub discrepancy_ww: f64,
    pub discrepancy_cc: f64,
    /// `|η(raw explicit) - η(shortcut)|`.
    pub discrepancy_ww_raw: f64,
    pub discrepancy_cc_raw: f64,
    pub certified: bool,
    pub certifying_state: bool,
}

pub fn evaluate(site: &SiteState) -> Result<SwapResult> {
    let v_out = bell_measure(&assemble_two_site(site)?)?;
    let eta_ww_raw = pt_eta(&v_out, W1, W2)?;
    let eta_cc_raw = pt_eta(&v_out, C1, C2)?;

    let out_wb = bell_measure(&assemble_two_site(&site.wb_gauge()?)?)?;
    let out_bc = bell_measure(&assemble_two_site(&site.bc_gauge()?)?)?;
    let eta_ww = pt_eta(&out_wb, W1, W2)?;
    let eta_cc = pt_eta(&out_bc, C1, C2)?;

    let short = purity_shortcut(site)?;
    let en_ww = negativity_from_eta(eta_ww);
    let en_cc = negativity_from_eta(eta_cc);
    let certified = en_ww > en_cc + VERDICT_MARGIN && en_cc > VERDICT_MARGIN;
    // Log purities: the differences are exactly the E_N differences above.
    let (lb, lwb, lbc) = (short.mu_b.ln(), short.mu_wb.ln(), short.mu_bc.ln());
    let certifying_state = lwb - lbc > VERDICT_MARGIN && lbc - lb > VERDICT_MARGIN;

    Ok(SwapResult {
        v_out,
        en_ww,
        en_cc,
        eta_ww,
        eta_cc,
        eta_ww_raw,
        eta_cc_raw,
        en_ww_raw: negativity_from_eta(eta_ww_raw),
        en_cc_raw: negativity_from_eta(eta_cc_raw),
        eta_ww_shortcut: short.eta_ww,
        eta_cc_shortcut: short.eta_cc,
        mu_b: short.mu_b,
        mu_wb: short.mu_wb,
        mu_bc: short.mu_bc,
        discrepancy_ww: (eta_ww - short.eta_ww).abs(),
        discrepancy_cc: (eta_cc - short.eta_cc).abs(),
        discrepancy_ww_raw: (eta_ww_raw - short.eta_ww).abs(),
        discrepancy_cc_raw: (eta_cc_raw - short.eta_cc).abs(),
        certified,
        certifying_state,
    })
}
