//! Gradient classification of the current.
//!
//! The current is a gradient exactly when `j(ε_0,ε_1) = j̃(ε_0) − j̃(ε_1)`,
//! and then necessarily `j = C(ε_0^{3/2} − ε_1^{3/2})`.

use serde::{Deserialize, Serialize};

use crate::kernels::Kernel;
use crate::numerics::{QuadResult, QuadratureSpec};

use super::scaling::pair_average;
use super::{ObservablesError, ReducedProfile, TildeCurrent};

pub const DEFAULT_GRADIENT_TOL: f64 = 1e-8;

/// Energies of the grid used to fit the gradient constant.
const FIT_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// `⟨(j + j̃(ε_1) − j̃(ε_0))²⟩_1`.
pub fn gradient_defect(k: &Kernel, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    let profile = ReducedProfile::build(k, spec)?;
    let tilde = TildeCurrent::build(k, &profile, spec)?;
    gradient_defect_with(k, &profile, &tilde, spec)
}

pub(crate) fn gradient_defect_with(
    k: &Kernel,
    profile: &ReducedProfile,
    tilde: &TildeCurrent,
    spec: &QuadratureSpec,
) -> Result<QuadResult, ObservablesError> {
    let r = pair_average(
        k.half_d(),
        1.0,
        |e0, e1| {
            let g = profile.current(e0, e1) + tilde.eval(e1) - tilde.eval(e0);
            g * g
        },
        spec,
    )?;
    Ok(QuadResult {
        converged: r.converged && profile.converged && tilde.converged,
        ..r
    })
}

/// Outcome of the gradient classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientVerdict {
    pub is_gradient: bool,
    pub defect: QuadResult,
    /// Fitted `C` in `j = C(ε_a^{3/2} − ε_b^{3/2})`, only for gradient kernels.
    pub c: Option<f64>,
    /// Mean squared residual of that fit.
    pub fit_residual: Option<f64>,
}

pub fn is_gradient(k: &Kernel, tol: f64, spec: &QuadratureSpec) -> Result<GradientVerdict, ObservablesError> {
    let profile = ReducedProfile::build(k, spec)?;
    let tilde = TildeCurrent::build(k, &profile, spec)?;
    let defect = gradient_defect_with(k, &profile, &tilde, spec)?;
    classify(&profile, defect, tol)
}

pub(crate) fn classify(
    profile: &ReducedProfile,
    defect: QuadResult,
    tol: f64,
) -> Result<GradientVerdict, ObservablesError> {
    if defect.value > tol {
        return Ok(GradientVerdict {
            is_gradient: false,
            defect,
            c: None,
            fit_residual: None,
        });
    }
    let (c, residual) = fit_power_law(|a, b| profile.current(a, b));
    if residual > tol {
        return Err(ObservablesError::Inconsistent(format!(
            "defect {:.3e} is within {tol:.1e} but the power-law fit leaves residual {residual:.3e}",
            defect.value
        )));
    }
    Ok(GradientVerdict {
        is_gradient: true,
        defect,
        c: Some(c),
        fit_residual: Some(residual),
    })
}

/// Least-squares `C` for `j ≈ C(ε_a^{3/2} − ε_b^{3/2})` and the mean squared residual.
pub(crate) fn fit_power_law<F: Fn(f64, f64) -> f64>(j: F) -> (f64, f64) {
    let points: Vec<(f64, f64)> = FIT_GRID
        .iter()
        .flat_map(|&a| FIT_GRID.iter().map(move |&b| (a, b)))
        .map(|(a, b)| (j(a, b), a.powf(1.5) - b.powf(1.5)))
        .collect();
    let (sjg, sgg) = points.iter().fold((0.0, 0.0), |(x, y), (j, g)| (x + j * g, y + g * g));
    let c = sjg / sgg;
    let residual = points.iter().map(|(j, g)| (j - c * g).powi(2)).sum::<f64>() / points.len() as f64;
    (c, residual)
}
