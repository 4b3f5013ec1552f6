//! Pair observables and static conductivity constants.
//!
//! For a pair of energies `(ε_a, ε_b)` with `s = ε_a + ε_b`, `α = ε_a/s`:
//!
//! ```text
//! ν = √s  ∫₀¹ W̄(α,β) dβ          collision frequency
//! j = s^{3/2} ∫₀¹ (α−β) W̄(α,β) dβ   mean current
//! h = s^{5/2} ∫₀¹ (α−β)² W̄(α,β) dβ  second moment
//! ```
//!
//! The constants follow from two-dimensional integrals of `W̃` over the unit
//! square with gamma-function prefactors, where `⟨s^m⟩₁ = Γ(d+m)/Γ(d)`.

mod constants;
mod gradient;
mod pair;
mod profile;
mod report;
mod scaling;
pub(crate) mod simplex;

pub use constants::{
    check_condition_3_4, check_identity, kappa_s, reduced_integrals, Condition34, KappaS, ReducedIntegrals,
    StaticConstants,
};
pub use gradient::{gradient_defect, is_gradient, GradientVerdict, DEFAULT_GRADIENT_TOL};
pub use pair::{h, h_bar, j, j_bar, nu, nu_bar, tilde_j};
pub use profile::{ReducedProfile, TildeCurrent};
pub use report::{static_report, StaticReport, EQUALITY_TOL, STATIC_CSV_HEADER};
pub use scaling::{temperature_averages, TemperatureAverages};

use thiserror::Error;

use crate::kernels::KernelError;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservablesError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("energies must be positive (got {0}, {1})")]
    Energy(f64, f64),
    #[error("inconsistent gradient diagnosis: {0}")]
    Inconsistent(String),
}

/// `Γ(a)/Γ(b)²`, the recurring prefactor of equilibrium averages.
pub(crate) fn gamma_ratio(a: f64, b: f64) -> f64 {
    use crate::numerics::special::log_gamma;
    (log_gamma(a).expect("positive") - 2.0 * log_gamma(b).expect("positive")).exp()
}
