//! Pair rates `ν`, `j`, `h` and the one-site averaged current `j̃`.

use crate::kernels::Kernel;
use crate::numerics::{integrate_semi_infinite, QuadResult, QuadratureSpec};

use super::simplex::line_integral;
use super::ObservablesError;

/// `∫₀¹ (α−β)^power W̄(α,β) dβ` with the complement `1−α` supplied exactly.
pub(crate) fn reduced_moment(
    k: &Kernel,
    alpha: f64,
    alpha_c: f64,
    power: u8,
    spec: &QuadratureSpec,
) -> Result<QuadResult, ObservablesError> {
    line_integral(
        k,
        alpha,
        alpha_c,
        |p| {
            let w = k.reduced_at(p);
            match power {
                0 => w,
                1 => p.diff * w,
                _ => p.diff * p.diff * w,
            }
        },
        spec,
    )
}

/// `ν̄(α) = ∫₀¹ W̄(α,β) dβ`.
pub fn nu_bar(k: &Kernel, alpha: f64, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    reduced_moment(k, alpha, 1.0 - alpha, 0, spec)
}

/// `J̄(α) = ∫₀¹ (α−β) W̄(α,β) dβ`.
pub fn j_bar(k: &Kernel, alpha: f64, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    reduced_moment(k, alpha, 1.0 - alpha, 1, spec)
}

/// `H̄(α) = ∫₀¹ (α−β)² W̄(α,β) dβ`.
pub fn h_bar(k: &Kernel, alpha: f64, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    reduced_moment(k, alpha, 1.0 - alpha, 2, spec)
}

fn pair(
    k: &Kernel,
    ea: f64,
    eb: f64,
    power: u8,
    spec: &QuadratureSpec,
) -> Result<QuadResult, ObservablesError> {
    if !(ea > 0.0 && eb > 0.0 && ea.is_finite() && eb.is_finite()) {
        return Err(ObservablesError::Energy(ea, eb));
    }
    let s = ea + eb;
    let r = reduced_moment(k, ea / s, eb / s, power, spec)?;
    Ok(r.scaled(s.powf(0.5 + power as f64)))
}

/// Collision frequency `ν(ε_a, ε_b) = ∫ W dη`.
pub fn nu(k: &Kernel, ea: f64, eb: f64, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    pair(k, ea, eb, 0, spec)
}

/// Mean current `j(ε_a, ε_b) = ∫ η W dη` from `a` to `b`.
pub fn j(k: &Kernel, ea: f64, eb: f64, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    pair(k, ea, eb, 1, spec)
}

/// Second moment `h(ε_a, ε_b) = ∫ η² W dη`.
pub fn h(k: &Kernel, ea: f64, eb: f64, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    pair(k, ea, eb, 2, spec)
}

/// `j̃(ε) = Γ(d/2)⁻¹ ∫₀^∞ j(ε, x) x^{d/2−1} e^{−x} dx` by direct nested
/// quadrature. For repeated evaluation use [`super::TildeCurrent`].
pub fn tilde_j(k: &Kernel, eps: f64, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ObservablesError::Energy(eps, eps));
    }
    let hd = k.half_d();
    let norm = 1.0 / crate::numerics::special::gamma(hd);
    let inner = QuadratureSpec {
        abs_tol: spec.abs_tol * 0.1,
        rel_tol: spec.rel_tol * 0.1,
        ..*spec
    };
    let failure = std::cell::RefCell::new(None);
    let inner_err = std::cell::Cell::new(0.0f64);
    let r = integrate_semi_infinite(
        |x| {
            if x <= 0.0 {
                return 0.0;
            }
            match j(k, eps, x, &inner) {
                Ok(v) => {
                    inner_err.set(inner_err.get().max(v.error));
                    v.value * x.powf(hd - 1.0) * (-x).exp()
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        1.0,
        &[eps],
        spec,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(QuadResult {
        error: r.error + inner_err.get(),
        ..r
    }
    .scaled(norm))
}
