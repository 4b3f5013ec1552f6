//! The conductivity constants `κ_f`, `κ_1`, `κ_2`, `κ_s` and the integral
//! identities relating them.

use serde::{Deserialize, Serialize};

use crate::kernels::{Kernel, SimplexPoint};
use crate::numerics::{integrate_2d_unit_square, QuadResult, QuadratureSpec, SingularLocus};

use super::simplex::square_integral;
use super::{gamma_ratio, ObservablesError, ReducedProfile};

/// Unit-square integrals of `W̃` against the weights entering the constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedIntegrals {
    /// `∫∫ W̃`
    pub total: QuadResult,
    /// `∫∫ (α−β) W̃`, zero for every kernel satisfying detailed balance
    pub identity: QuadResult,
    /// `∫∫ α(α−β) W̃`
    pub alpha_moment: QuadResult,
    /// `∫∫ (α−1/2)(α−β) W̃`
    pub centered: QuadResult,
    /// `∫∫ (α−β)²/2 W̃`
    pub second: QuadResult,
}

fn weighted<F>(k: &Kernel, weight: F, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError>
where
    F: Fn(&SimplexPoint) -> f64,
{
    square_integral(
        k,
        |p| {
            let w = weight(p);
            if w == 0.0 {
                0.0
            } else {
                w * k.tilde_at(p)
            }
        },
        spec,
    )
}

pub fn reduced_integrals(k: &Kernel, spec: &QuadratureSpec) -> Result<ReducedIntegrals, ObservablesError> {
    Ok(ReducedIntegrals {
        total: weighted(k, |_| 1.0, spec)?,
        identity: weighted(k, |p| p.diff, spec)?,
        alpha_moment: weighted(k, |p| p.alpha * p.diff, spec)?,
        centered: weighted(k, |p| (p.alpha - 0.5) * p.diff, spec)?,
        second: weighted(k, |p| 0.5 * p.diff * p.diff, spec)?,
    })
}

/// `κ_f`, `κ_1`, `κ_2` with propagated quadrature errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticConstants {
    pub kappa_f: QuadResult,
    pub kappa_1: QuadResult,
    pub kappa_2: QuadResult,
}

impl StaticConstants {
    pub fn from_integrals(k: &Kernel, r: &ReducedIntegrals) -> Self {
        let d = k.d() as f64;
        let hd = k.half_d();
        let c0 = gamma_ratio(d + 0.5, hd);
        let c5 = gamma_ratio(d + 2.5, hd);
        Self {
            kappa_f: r.total.scaled(c0),
            kappa_1: r.centered.scaled(c5),
            kappa_2: r.second.scaled(c5),
        }
    }

    pub fn compute(k: &Kernel, spec: &QuadratureSpec) -> Result<Self, ObservablesError> {
        Ok(Self::from_integrals(k, &reduced_integrals(k, spec)?))
    }
}

/// Value of `∫∫ (α−β) W̃`.
pub fn check_identity(k: &Kernel, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    weighted(k, |p| p.diff, spec)
}

/// Both sides of `∫∫W̃ = (d+3/2)(d+1/2) ∫∫ α(α−β) W̃`, equivalent to `κ_f = κ_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition34 {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|`
    pub residual: f64,
    /// Combined quadrature error of both sides.
    pub error: f64,
    pub converged: bool,
}

impl Condition34 {
    pub fn from_integrals(k: &Kernel, r: &ReducedIntegrals) -> Self {
        let d = k.d() as f64;
        let factor = (d + 1.5) * (d + 0.5);
        let lhs = r.total.value;
        let rhs = factor * r.alpha_moment.value;
        Self {
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
            error: r.total.error + factor * r.alpha_moment.error,
            converged: r.total.converged && r.alpha_moment.converged,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.residual <= tol
    }
}

pub fn check_condition_3_4(k: &Kernel, spec: &QuadratureSpec) -> Result<Condition34, ObservablesError> {
    let r = ReducedIntegrals {
        total: weighted(k, |_| 1.0, spec)?,
        alpha_moment: weighted(k, |p| p.alpha * p.diff, spec)?,
        identity: QuadResult::zero(),
        centered: QuadResult::zero(),
        second: QuadResult::zero(),
    };
    Ok(Condition34::from_integrals(k, &r))
}

/// Static conductivity computed as `½⟨h⟩₁` by quadrature over the two site
/// energies, cross-checked against `κ_1` from the unit-square route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaS {
    pub value: f64,
    pub error: f64,
    pub via_kappa_1: f64,
    pub discrepancy: f64,
    /// Set when the two routes disagree beyond twice their combined error.
    pub warning: bool,
    pub converged: bool,
}

/// `½⟨h(ε_0, ε_1)⟩₁` over the product gamma measure, in the coordinates
/// `x = e^{−ε_0}`, `y = e^{−ε_1}`.
pub fn half_mean_h(k: &Kernel, profile: &ReducedProfile, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError> {
    let hd = k.half_d();
    let norm = 0.5 / crate::numerics::special::gamma(hd).powi(2);
    let r = integrate_2d_unit_square(
        |x, y| {
            let (e0, e1) = (-x.ln(), -y.ln());
            if !(e0 > 0.0 && e1 > 0.0) {
                return 0.0;
            }
            let s = e0 + e1;
            let w = if hd == 1.0 { 1.0 } else { (e0 * e1).powf(hd - 1.0) };
            norm * s * s * s.sqrt() * profile.h_bar(e0 / s) * w
        },
        &[SingularLocus::Diagonal],
        spec,
    )?;
    // interpolation error of H̄ enters through the same weight
    let interp = 0.5 * gamma_ratio(k.d() as f64 + 2.5, hd) * profile.max_node_error;
    Ok(QuadResult {
        error: r.error + interp,
        converged: r.converged && profile.converged,
        ..r
    })
}

pub fn kappa_s(k: &Kernel, spec: &QuadratureSpec) -> Result<KappaS, ObservablesError> {
    let profile = ReducedProfile::build(k, spec)?;
    let constants = StaticConstants::compute(k, spec)?;
    kappa_s_with(k, &profile, &constants.kappa_1, spec)
}

pub(crate) fn kappa_s_with(
    k: &Kernel,
    profile: &ReducedProfile,
    kappa_1: &QuadResult,
    spec: &QuadratureSpec,
) -> Result<KappaS, ObservablesError> {
    let h = half_mean_h(k, profile, spec)?;
    let discrepancy = (h.value - kappa_1.value).abs();
    let allowed = 2.0 * (h.error + kappa_1.error) + 8.0 * f64::EPSILON * h.value.abs();
    Ok(KappaS {
        value: h.value,
        error: h.error,
        via_kappa_1: kappa_1.value,
        discrepancy,
        warning: discrepancy > allowed,
        converged: h.converged && kappa_1.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_kernel;
    use std::f64::consts::PI;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::with_tolerance(1e-12, 1e-12)
    }

    #[test]
    fn gg3_constants_are_one() {
        let k = make_kernel("gg3").unwrap();
        let r = reduced_integrals(&k, &spec()).unwrap();
        assert!((r.total.value - 2.0 * PI.sqrt() / 15.0).abs() < 1e-11);
        let c = StaticConstants::from_integrals(&k, &r);
        for v in [c.kappa_f, c.kappa_1, c.kappa_2] {
            assert!((v.value - 1.0).abs() < 1e-10, "{v:?}");
        }
        assert!(r.identity.value.abs() < 1e-11);
    }

    #[test]
    fn uniform_constants() {
        let k = make_kernel("uniform").unwrap();
        let c = StaticConstants::compute(&k, &spec()).unwrap();
        assert!((c.kappa_f.value - 3.0 * PI.sqrt() / 4.0).abs() < 1e-11);
        assert!((c.kappa_1.value - 105.0 * PI.sqrt() / 16.0 / 12.0).abs() < 1e-11);
        assert!((c.kappa_2.value - c.kappa_1.value).abs() < 1e-11);
        let c34 = check_condition_3_4(&k, &spec()).unwrap();
        assert!((c34.lhs - 1.0).abs() < 1e-12);
        // (7/2)(5/2)/12 = 35/48; consistent with κ_f/κ_1 = 48/35
        assert!((c34.rhs - 35.0 / 48.0).abs() < 1e-11);
        assert!(!c34.holds(1e-3));
    }

    #[test]
    fn gg2_total_reference() {
        let k = make_kernel("gg2").unwrap();
        let r = reduced_integrals(&k, &spec()).unwrap();
        assert!((r.total.value - 0.752_252_778_063_674_5).abs() < 1e-10, "{:?}", r.total);
        let c = StaticConstants::from_integrals(&k, &r);
        assert!((c.kappa_f.value - 1.0).abs() < 1e-9);
        assert!((c.kappa_1.value - c.kappa_2.value).abs() < 1e-9);
    }

    #[test]
    fn broken_kernel_identity_value() {
        let k = make_kernel(crate::kernels::BROKEN_FIXTURE).unwrap();
        let v = check_identity(&k, &spec()).unwrap();
        assert!((v.value - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_s_routes_agree() {
        for name in ["root-eta", "gg3", "uniform"] {
            let k = make_kernel(name).unwrap();
            let ks = kappa_s(&k, &spec()).unwrap();
            assert!(!ks.warning, "{name}: {ks:?}");
            assert!(ks.discrepancy < 1e-9, "{name}: {ks:?}");
        }
        let ks = kappa_s(&make_kernel("root-eta").unwrap(), &spec()).unwrap();
        assert!((ks.value - 3.0 * PI.sqrt() / 4.0).abs() < 1e-9);
    }
}
