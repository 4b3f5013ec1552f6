//! The static report: all constants, condition residuals and the gradient
//! diagnosis of one kernel, with per-entry error estimates.

use serde::{Deserialize, Serialize};

use crate::kernels::Kernel;
use crate::numerics::QuadratureSpec;

use super::constants::kappa_s_with;
use super::gradient::{classify, gradient_defect_with};
use super::{reduced_integrals, Condition34, ObservablesError, ReducedProfile, StaticConstants, TildeCurrent};

/// Absolute tolerance for the static equalities in the summary.
pub const EQUALITY_TOL: f64 = 1e-8;

pub const STATIC_CSV_HEADER: &str = "kernel,d,kappa_f,kappa_f_err,kappa_1,kappa_1_err,kappa_2,kappa_2_err,\
kappa_s,kappa_s_err,kappa_s_discrepancy,kappa_s_warning,identity_residual,identity_err,cond34_lhs,cond34_rhs,\
cond34_err,gradient_defect,gradient_defect_err,is_gradient,gradient_c,converged";

/// Flat record of the static quantities of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticReport {
    pub kernel: String,
    pub d: u32,
    pub kappa_f: f64,
    pub kappa_f_err: f64,
    pub kappa_1: f64,
    pub kappa_1_err: f64,
    pub kappa_2: f64,
    pub kappa_2_err: f64,
    /// `½⟨h⟩₁` by quadrature in energy space.
    pub kappa_s: f64,
    pub kappa_s_err: f64,
    /// `|κ_s − κ_1|`
    pub kappa_s_discrepancy: f64,
    pub kappa_s_warning: bool,
    /// `∫∫ (α−β) W̃`
    pub identity_residual: f64,
    pub identity_err: f64,
    pub cond34_lhs: f64,
    pub cond34_rhs: f64,
    pub cond34_err: f64,
    pub gradient_defect: f64,
    pub gradient_defect_err: f64,
    pub is_gradient: bool,
    pub gradient_c: Option<f64>,
    /// Every quadrature behind the report met its tolerance.
    pub converged: bool,
}

pub fn static_report(k: &Kernel, gradient_tol: f64, spec: &QuadratureSpec) -> Result<StaticReport, ObservablesError> {
    let r = reduced_integrals(k, spec)?;
    let c = StaticConstants::from_integrals(k, &r);
    let c34 = Condition34::from_integrals(k, &r);
    let profile = ReducedProfile::build(k, spec)?;
    let ks = kappa_s_with(k, &profile, &c.kappa_1, spec)?;
    let tilde = TildeCurrent::build(k, &profile, spec)?;
    let defect = gradient_defect_with(k, &profile, &tilde, spec)?;
    let verdict = classify(&profile, defect, gradient_tol)?;
    let converged = [r.total, r.identity, r.alpha_moment, r.centered, r.second]
        .iter()
        .all(|q| q.converged)
        && ks.converged
        && defect.converged;
    Ok(StaticReport {
        kernel: k.name().to_string(),
        d: k.d(),
        kappa_f: c.kappa_f.value,
        kappa_f_err: c.kappa_f.error,
        kappa_1: c.kappa_1.value,
        kappa_1_err: c.kappa_1.error,
        kappa_2: c.kappa_2.value,
        kappa_2_err: c.kappa_2.error,
        kappa_s: ks.value,
        kappa_s_err: ks.error,
        kappa_s_discrepancy: ks.discrepancy,
        kappa_s_warning: ks.warning,
        identity_residual: r.identity.value,
        identity_err: r.identity.error,
        cond34_lhs: c34.lhs,
        cond34_rhs: c34.rhs,
        cond34_err: c34.error,
        gradient_defect: defect.value,
        gradient_defect_err: defect.error,
        is_gradient: verdict.is_gradient,
        gradient_c: verdict.c,
        converged,
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQUALITY_TOL * a.abs().max(b.abs()).max(1.0)
}

impl StaticReport {
    pub fn kappa_f_equals_kappa_1(&self) -> bool {
        close(self.kappa_f, self.kappa_1)
    }

    pub fn kappa_1_equals_kappa_2(&self) -> bool {
        close(self.kappa_1, self.kappa_2)
    }

    pub fn kappa_s_equals_kappa_1(&self) -> bool {
        close(self.kappa_s, self.kappa_1)
    }

    pub fn condition_3_4_holds(&self) -> bool {
        close(self.cond34_lhs, self.cond34_rhs)
    }

    pub fn csv_row(&self) -> String {
        let f = |x: f64| format!("{x:.17e}");
        [
            self.kernel.clone(),
            self.d.to_string(),
            f(self.kappa_f),
            f(self.kappa_f_err),
            f(self.kappa_1),
            f(self.kappa_1_err),
            f(self.kappa_2),
            f(self.kappa_2_err),
            f(self.kappa_s),
            f(self.kappa_s_err),
            f(self.kappa_s_discrepancy),
            self.kappa_s_warning.to_string(),
            f(self.identity_residual),
            f(self.identity_err),
            f(self.cond34_lhs),
            f(self.cond34_rhs),
            f(self.cond34_err),
            f(self.gradient_defect),
            f(self.gradient_defect_err),
            self.is_gradient.to_string(),
            self.gradient_c.map(f).unwrap_or_default(),
            self.converged.to_string(),
        ]
        .join(",")
    }

    /// Human-readable statement of which static equalities hold.
    pub fn summary(&self) -> String {
        let eq = |b: bool| if b { "=" } else { "≠" };
        let mut out = format!(
            "kernel {} (d={}): κ_s {} κ_1 {} κ_2, κ_1 {} κ_f\n",
            self.kernel,
            self.d,
            eq(self.kappa_s_equals_kappa_1()),
            eq(self.kappa_1_equals_kappa_2()),
            eq(self.kappa_f_equals_kappa_1()),
        );
        out += &format!(
            "  κ_f = {:.12}  κ_1 = {:.12}  κ_2 = {:.12}  κ_s = {:.12}\n",
            self.kappa_f, self.kappa_1, self.kappa_2, self.kappa_s
        );
        out += &format!(
            "  condition (3=4): {} (lhs {:.12}, rhs {:.12})\n",
            if self.condition_3_4_holds() { "holds" } else { "fails" },
            self.cond34_lhs,
            self.cond34_rhs
        );
        out += &match self.gradient_c {
            Some(c) => format!("  gradient: yes, j = {c:.10}(ε_a^3/2 − ε_b^3/2)\n"),
            None => format!("  gradient: no, defect {:.6e}\n", self.gradient_defect),
        };
        if self.kappa_s_warning {
            out += &format!("  warning: κ_s routes disagree by {:.3e}\n", self.kappa_s_discrepancy);
        }
        if !self.converged {
            out += "  warning: some quadratures did not reach tolerance\n";
        }
        out
    }
}
