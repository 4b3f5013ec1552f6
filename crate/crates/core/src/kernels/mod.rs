//! Rate kernels of energy-exchange chains.
//!
//! A kernel `W(ε_a, ε_b | ε_a − η, ε_b + η)` gives the rate at which energy
//! `η` moves from site `a` to site `b`. Kernels in this crate are stored in
//! reduced form
//!
//! ```text
//! W̄(α, β) = W(α, 1−α | β, 1−β)
//! ```
//!
//! together with the cell dimension `d`; the full kernel follows from
//! homogeneity of degree −1/2:
//!
//! ```text
//! W(ε_a, ε_b | ε_a − η, ε_b + η) = W̄(ε_a/s, (ε_a − η)/s) / √s,   s = ε_a + ε_b.
//! ```
//!
//! The symmetric form `W̃(α, β) = W̄(α, β)·(α(1−α))^{d/2−1}` absorbs the
//! equilibrium weight and is invariant under `α ↔ β` and `(α, β) ↦ (1−α, 1−β)`
//! for every valid kernel.

mod conditions;
pub mod raw;

pub use conditions::{check_conditions, ConditionCheck, ConditionReport, DEFAULT_CONDITION_TOL};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use exmex::{Express, FlatEx};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{elliptic_k_from_complementary, SingularLocus};

/// Names accepted by [`make_kernel`].
pub const BUILTIN_KERNELS: [&str; 4] = ["gg2", "gg3", "root-eta", "uniform"];

/// Fixture that violates the symmetry condition; accepted by [`make_kernel`]
/// but not listed among the valid kernels.
pub const BROKEN_FIXTURE: &str = "broken-alpha";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("unknown kernel '{name}'; known kernels: {}", known.join(", "))]
    Unknown { name: String, known: Vec<String> },
    #[error("{what} (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error("kernel '{kernel}' is singular at alpha={alpha}, beta={beta}")]
    Singular {
        kernel: String,
        alpha: f64,
        beta: f64,
    },
    #[error("invalid custom kernel: {0}")]
    InvalidCustom(String),
    #[error("custom kernel evaluation failed: {0}")]
    Evaluation(String),
}

/// A point of the reduced simplex given through all four coordinates, so
/// that complements enter exactly instead of being recomputed as `1 − x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexPoint {
    pub alpha: f64,
    pub alpha_c: f64,
    pub beta: f64,
    pub beta_c: f64,
    /// `α − β`, the exchanged fraction.
    pub diff: f64,
}

impl SimplexPoint {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            alpha_c: 1.0 - alpha,
            beta,
            beta_c: 1.0 - beta,
            diff: alpha - beta,
        }
    }

    /// Reduced coordinates of an exchange of `η` between energies `ε_a`, `ε_b`.
    pub fn from_energies(ea: f64, eb: f64, eta: f64) -> Self {
        let s = ea + eb;
        Self {
            alpha: ea / s,
            alpha_c: eb / s,
            beta: (ea - eta) / s,
            beta_c: (eb + eta) / s,
            diff: eta / s,
        }
    }

    /// Image under the relabelling `a ↔ b`.
    pub fn swapped_sites(self) -> Self {
        Self {
            alpha: self.alpha_c,
            alpha_c: self.alpha,
            beta: self.beta_c,
            beta_c: self.beta,
            diff: -self.diff,
        }
    }

    /// Image under `α ↔ β`.
    pub fn transposed(self) -> Self {
        Self {
            alpha: self.beta,
            alpha_c: self.beta_c,
            beta: self.alpha,
            beta_c: self.alpha_c,
            diff: -self.diff,
        }
    }

    fn min4(&self) -> f64 {
        self.alpha.min(self.alpha_c).min(self.beta.min(self.beta_c))
    }
}

/// User-supplied reduced kernel `W̄(alpha, beta)`.
struct CustomForm {
    source: String,
    expr: FlatEx<f64>,
    /// For each variable of `expr` in its internal order: true for `alpha`.
    slots: Vec<bool>,
}

#[derive(Clone)]
enum Form {
    Gg2,
    Gg3,
    RootEta,
    Uniform,
    BrokenAlpha,
    Custom(Arc<CustomForm>),
}

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Form::Gg2 => write!(f, "Gg2"),
            Form::Gg3 => write!(f, "Gg3"),
            Form::RootEta => write!(f, "RootEta"),
            Form::Uniform => write!(f, "Uniform"),
            Form::BrokenAlpha => write!(f, "BrokenAlpha"),
            Form::Custom(c) => write!(f, "Custom({:?})", c.source),
        }
    }
}

/// Prefactor √(2/π³) of the two-dimensional hard-disc kernel.
const GG2_PREFACTOR: f64 = 0.253_974_543_736_963_9;

/// Serializable description of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: String,
    pub d: u32,
    /// Reduced form `W̄` as an expression in `alpha`, `beta`; `None` for built-ins.
    pub expression: Option<String>,
    pub singular_loci: Vec<SingularLocus>,
    pub kink_loci: Vec<SingularLocus>,
}

/// An immutable rate kernel.
#[derive(Debug, Clone)]
pub struct Kernel {
    name: String,
    d: u32,
    form: Form,
    singular_loci: Vec<SingularLocus>,
    kink_loci: Vec<SingularLocus>,
}

/// Look up a built-in kernel by name.
pub fn make_kernel(name: &str) -> Result<Kernel, KernelError> {
    use SingularLocus::*;
    let all = vec![Diagonal, AntiDiagonal, AlphaMid, BetaMid];
    let (d, form, singular, kinks) = match name {
        // log-divergent on β = 1−α; piecewise on the other lines
        "gg2" => (2, Form::Gg2, vec![AntiDiagonal], vec![Diagonal, AlphaMid, BetaMid]),
        "gg3" => (3, Form::Gg3, vec![], all),
        "root-eta" => (2, Form::RootEta, vec![Diagonal], vec![]),
        "uniform" => (2, Form::Uniform, vec![], vec![]),
        BROKEN_FIXTURE => (2, Form::BrokenAlpha, vec![], vec![]),
        _ => {
            return Err(KernelError::Unknown {
                name: name.to_string(),
                known: BUILTIN_KERNELS.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(Kernel {
        name: name.to_string(),
        d,
        form,
        singular_loci: singular,
        kink_loci: kinks,
    })
}

impl Kernel {
    /// Kernel with reduced form given by an expression in `alpha` and `beta`.
    pub fn custom(
        name: &str,
        d: u32,
        expression: &str,
        singular_loci: Vec<SingularLocus>,
        kink_loci: Vec<SingularLocus>,
    ) -> Result<Self, KernelError> {
        if d == 0 {
            return Err(KernelError::InvalidCustom("d must be a positive integer".into()));
        }
        let expr = exmex::parse::<f64>(expression)
            .map_err(|e| KernelError::InvalidCustom(format!("{expression}: {e}")))?;
        let mut slots = Vec::new();
        for v in expr.var_names() {
            match v.as_str() {
                "alpha" => slots.push(true),
                "beta" => slots.push(false),
                other => {
                    return Err(KernelError::InvalidCustom(format!(
                        "unknown variable '{other}' (use alpha and beta)"
                    )))
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            d,
            form: Form::Custom(Arc::new(CustomForm {
                source: expression.to_string(),
                expr,
                slots,
            })),
            singular_loci,
            kink_loci,
        })
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self, KernelError> {
        match &spec.expression {
            Some(e) => Self::custom(
                &spec.name,
                spec.d,
                e,
                spec.singular_loci.clone(),
                spec.kink_loci.clone(),
            ),
            None => make_kernel(&spec.name),
        }
    }

    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            name: self.name.clone(),
            d: self.d,
            expression: match &self.form {
                Form::Custom(c) => Some(c.source.clone()),
                _ => None,
            },
            singular_loci: self.singular_loci.clone(),
            kink_loci: self.kink_loci.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Shape parameter `d/2` of the single-site equilibrium law.
    pub fn half_d(&self) -> f64 {
        0.5 * self.d as f64
    }

    /// Curves on which `W̃` diverges.
    pub fn singular_loci(&self) -> &[SingularLocus] {
        &self.singular_loci
    }

    /// Curves across which `W̃` is only piecewise smooth.
    pub fn kink_loci(&self) -> &[SingularLocus] {
        &self.kink_loci
    }

    /// Every declared curve, for quadrature breakpoints.
    pub fn all_loci(&self) -> Vec<SingularLocus> {
        let mut v = self.singular_loci.clone();
        v.extend(self.kink_loci.iter().copied().filter(|l| !self.singular_loci.contains(l)));
        v
    }

    /// Reduced kernel `W̄` at a simplex point, without domain checks. May be
    /// infinite on a singular locus.
    pub fn reduced_at(&self, p: &SimplexPoint) -> f64 {
        match &self.form {
            Form::Gg2 => gg2_tilde(p),
            Form::Gg3 => gg3_tilde(p) / (p.alpha * p.alpha_c).sqrt(),
            Form::RootEta => 1.0 / p.diff.abs().sqrt(),
            Form::Uniform => 1.0,
            Form::BrokenAlpha => p.alpha,
            Form::Custom(c) => {
                let vars: Vec<f64> = c
                    .slots
                    .iter()
                    .map(|&is_alpha| if is_alpha { p.alpha } else { p.beta })
                    .collect();
                c.expr.eval(&vars).unwrap_or(f64::NAN)
            }
        }
    }

    /// Symmetric form `W̃` at a simplex point, without domain checks.
    pub fn tilde_at(&self, p: &SimplexPoint) -> f64 {
        match &self.form {
            Form::Gg2 => gg2_tilde(p),
            Form::Gg3 => gg3_tilde(p),
            _ => self.reduced_at(p) * self.tilde_weight(p.alpha * p.alpha_c),
        }
    }

    fn tilde_weight(&self, alpha_alpha_c: f64) -> f64 {
        match self.d {
            2 => 1.0,
            4 => alpha_alpha_c,
            d => alpha_alpha_c.powf(0.5 * d as f64 - 1.0),
        }
    }

    /// `W̄(α, β)` for `α, β ∈ (0, 1)`.
    pub fn reduced(&self, alpha: f64, beta: f64) -> f64 {
        self.reduced_at(&SimplexPoint::new(alpha, beta))
    }

    /// `W̃(α, β)` for `α, β ∈ (0, 1)`.
    pub fn tilde(&self, alpha: f64, beta: f64) -> f64 {
        self.tilde_at(&SimplexPoint::new(alpha, beta))
    }

    /// Full kernel `W(ε_a, ε_b | ε_a − η, ε_b + η)`.
    #[allow(non_snake_case)]
    pub fn eval_W(&self, ea: f64, eb: f64, eta: f64) -> Result<f64, KernelError> {
        if !(ea > 0.0 && ea.is_finite()) {
            return Err(KernelError::Domain {
                what: "energy eps_a must be positive",
                value: ea,
            });
        }
        if !(eb > 0.0 && eb.is_finite()) {
            return Err(KernelError::Domain {
                what: "energy eps_b must be positive",
                value: eb,
            });
        }
        if !(eta > -eb && eta < ea) {
            return Err(KernelError::Domain {
                what: "exchange must satisfy -eps_b < eta < eps_a",
                value: eta,
            });
        }
        let p = SimplexPoint::from_energies(ea, eb, eta);
        let w = self.reduced_at(&p);
        self.check_value(w, &p)?;
        Ok(w / (ea + eb).sqrt())
    }

    /// `W̃(α, β)`, rejecting points outside the open square and points on a
    /// declared singular locus.
    pub fn eval_tilde(&self, alpha: f64, beta: f64) -> Result<f64, KernelError> {
        for (v, what) in [(alpha, "alpha must lie in (0, 1)"), (beta, "beta must lie in (0, 1)")] {
            if !(v > 0.0 && v < 1.0) {
                return Err(KernelError::Domain { what, value: v });
            }
        }
        if self.singular_loci.iter().any(|l| l.contains(alpha, beta)) {
            return Err(self.singular(alpha, beta));
        }
        let p = SimplexPoint::new(alpha, beta);
        let w = self.tilde_at(&p);
        self.check_value(w, &p)?;
        Ok(w)
    }

    fn singular(&self, alpha: f64, beta: f64) -> KernelError {
        KernelError::Singular {
            kernel: self.name.clone(),
            alpha,
            beta,
        }
    }

    fn check_value(&self, w: f64, p: &SimplexPoint) -> Result<(), KernelError> {
        if w.is_nan() {
            return Err(KernelError::Evaluation(format!(
                "{} returned NaN at alpha={}, beta={}",
                self.name, p.alpha, p.beta
            )));
        }
        if w.is_infinite() {
            return Err(self.singular(p.alpha, p.beta));
        }
        Ok(())
    }

    /// `ν̄(α) = ∫₀¹ W̄(α, β) dβ` where a closed form is known.
    pub fn closed_form_nu_bar(&self, alpha: f64) -> Option<f64> {
        match &self.form {
            Form::Gg3 => {
                let a = alpha.min(1.0 - alpha);
                Some((PI / 8.0).sqrt() * a.sqrt() * (1.0 - 2.0 * a / 3.0) / (alpha * (1.0 - alpha)).sqrt())
            }
            Form::RootEta => Some(2.0 * alpha.sqrt() + 2.0 * (1.0 - alpha).sqrt()),
            Form::Uniform => Some(1.0),
            Form::BrokenAlpha => Some(alpha),
            Form::Gg2 | Form::Custom(_) => None,
        }
    }
}

fn gg2_tilde(p: &SimplexPoint) -> f64 {
    let big = p.alpha.min(p.beta).max(p.alpha_c.min(p.beta_c));
    let small = p.min4();
    // k' = √(1 − small/big), formed without cancellation
    let kp = ((big - small) / big).sqrt();
    GG2_PREFACTOR / big.sqrt() * elliptic_k_from_complementary(kp)
}

fn gg3_tilde(p: &SimplexPoint) -> f64 {
    (PI / 8.0).sqrt() * p.min4().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::integrate_1d_graded;
    use crate::numerics::QuadratureSpec;
    use rand::{Rng, SeedableRng};

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(2024)
    }

    #[test]
    fn dimensions_of_builtins() {
        let ds: Vec<u32> = BUILTIN_KERNELS.iter().map(|n| make_kernel(n).unwrap().d()).collect();
        assert_eq!(ds, vec![2, 3, 2, 2]);
    }

    #[test]
    fn unknown_kernel_lists_known_names() {
        let err = make_kernel("gg4").unwrap_err();
        let msg = err.to_string();
        for n in BUILTIN_KERNELS {
            assert!(msg.contains(n), "{msg}");
        }
    }

    #[test]
    fn gg3_tilde_at_centre() {
        let k = make_kernel("gg3").unwrap();
        let v = k.eval_tilde(0.5, 0.5).unwrap();
        assert!((v - (PI / 16.0).sqrt()).abs() < 1e-15);
        assert!((v - 0.443_113_462_726_379_2).abs() < 1e-15);
    }

    #[test]
    fn gg3_full_kernel_third_branch() {
        let k = make_kernel("gg3").unwrap();
        let v = k.eval_W(1.0, 1.0, 0.5).unwrap();
        assert!((v - (PI / 16.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gg2_tilde_reference_value() {
        // mpmath: sqrt(2/pi^3)/sqrt(0.3) * ellipk(2/3)
        let k = make_kernel("gg2").unwrap();
        let v = k.eval_tilde(0.2, 0.7).unwrap();
        assert!((v - 0.940_812_013_893_967_7).abs() < 1e-14, "{v}");
    }

    #[test]
    fn gg2_is_singular_on_anti_diagonal_only() {
        let k = make_kernel("gg2").unwrap();
        assert!(matches!(k.eval_tilde(0.25, 0.75), Err(KernelError::Singular { .. })));
        assert!(k.eval_tilde(0.3, 0.3).unwrap().is_finite());
        assert!(k.tilde(0.5, 0.5).is_infinite());
    }

    #[test]
    fn root_eta_values() {
        let k = make_kernel("root-eta").unwrap();
        for &(a, b) in &[(1.0, 1.0), (3.0, 0.5), (0.3, 7.0)] {
            assert!((k.eval_W(a, b, 0.25).unwrap() - 2.0).abs() < 1e-14);
        }
        assert!(k.eval_W(1.0, 1.0, 0.0).is_err());
        assert!(k.eval_tilde(0.4, 0.4).is_err());
    }

    #[test]
    fn uniform_is_one() {
        let k = make_kernel("uniform").unwrap();
        assert_eq!(k.eval_tilde(0.1, 0.9).unwrap(), 1.0);
        assert_eq!(k.eval_W(2.0, 2.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn eval_w_rejects_negative_post_energies() {
        let k = make_kernel("gg3").unwrap();
        assert!(k.eval_W(1.0, 1.0, 1.0).is_err());
        assert!(k.eval_W(1.0, 1.0, -1.0).is_err());
        assert!(k.eval_W(-1.0, 1.0, 0.1).is_err());
        assert!(k.eval_tilde(0.0, 0.5).is_err());
    }

    #[test]
    fn homogeneity_for_all_builtins() {
        let mut r = rng();
        for name in BUILTIN_KERNELS {
            let k = make_kernel(name).unwrap();
            for _ in 0..2000 {
                let ea: f64 = r.gen_range(0.01..5.0);
                let eb: f64 = r.gen_range(0.01..5.0);
                let eta = r.gen_range(-eb..ea);
                let Ok(base) = k.eval_W(ea, eb, eta) else { continue };
                // rounding of c·x is amplified where ε_a−η or ε_b+η cancels
                let cond = 1f64.max(ea / (ea - eta)).max(eb / (eb + eta));
                for c in [1e-3, 0.1, 1.0, 10.0, 1e3] {
                    let scaled = k.eval_W(c * ea, c * eb, c * eta).unwrap();
                    let expect = base / c.sqrt();
                    assert!((scaled - expect).abs() <= 1e-12 * cond * expect, "{name} c={c}");
                }
            }
        }
    }

    #[test]
    fn site_swap_is_exact() {
        let mut r = rng();
        for name in BUILTIN_KERNELS {
            let k = make_kernel(name).unwrap();
            for _ in 0..10_000 {
                let ea: f64 = r.gen_range(0.01..5.0);
                let eb: f64 = r.gen_range(0.01..5.0);
                let eta = r.gen_range(-eb..ea);
                let x = k.eval_W(ea, eb, eta);
                let y = k.eval_W(eb, ea, -eta);
                match (x, y) {
                    (Ok(x), Ok(y)) => assert_eq!(x.to_bits(), y.to_bits(), "{name}"),
                    (Err(_), Err(_)) => {}
                    other => panic!("{name}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn tilde_symmetries() {
        let mut r = rng();
        for name in BUILTIN_KERNELS {
            let k = make_kernel(name).unwrap();
            for _ in 0..10_000 {
                let a: f64 = r.gen_range(1e-6..1.0 - 1e-6);
                let b: f64 = r.gen_range(1e-6..1.0 - 1e-6);
                let v = k.tilde(a, b);
                if !v.is_finite() {
                    continue;
                }
                for w in [k.tilde(b, a), k.tilde(1.0 - a, 1.0 - b), k.tilde(1.0 - b, 1.0 - a)] {
                    assert!((v - w).abs() <= 1e-12 * v.max(1.0), "{name} ({a},{b}): {v} vs {w}");
                }
            }
        }
    }

    #[test]
    fn closed_form_nu_bar_matches_quadrature() {
        let mut r = rng();
        let spec = QuadratureSpec::with_tolerance(1e-12, 1e-12);
        for name in ["gg3", "root-eta", "uniform"] {
            let k = make_kernel(name).unwrap();
            for _ in 0..100 {
                let a: f64 = r.gen_range(0.001..0.999);
                let q = integrate_1d_graded(|b| k.reduced(a, b), 0.0, 1.0, &[a, 1.0 - a, 0.5], &spec).unwrap();
                let c = k.closed_form_nu_bar(a).unwrap();
                assert!((q.value - c).abs() < 1e-9, "{name} alpha={a}: {} vs {c}", q.value);
            }
        }
        assert!(make_kernel("gg2").unwrap().closed_form_nu_bar(0.3).is_none());
    }

    #[test]
    fn custom_kernel_matches_builtin() {
        let c = Kernel::custom("u2", 2, "1.0 + 0*alpha*beta", vec![], vec![]).unwrap();
        assert_eq!(c.eval_tilde(0.3, 0.8).unwrap(), 1.0);
        // exmex writes min as an infix binary operator
        let g = Kernel::custom(
            "gg3-expr",
            3,
            "sqrt(PI/8) * sqrt((alpha min (1-alpha)) min (beta min (1-beta))) / sqrt(alpha*(1-alpha))",
            vec![],
            vec![],
        )
        .unwrap();
        let k = make_kernel("gg3").unwrap();
        for &(a, b) in &[(0.2, 0.6), (0.7, 0.1), (0.5, 0.5)] {
            assert!((g.tilde(a, b) - k.tilde(a, b)).abs() < 1e-14);
        }
        let b = Kernel::custom("beta-only", 2, "beta*(1-beta)", vec![], vec![]).unwrap();
        assert!((b.reduced(0.9, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn custom_kernel_rejects_unknown_variables() {
        assert!(matches!(
            Kernel::custom("x", 2, "gamma*alpha", vec![], vec![]),
            Err(KernelError::InvalidCustom(_))
        ));
        assert!(Kernel::custom("x", 0, "alpha", vec![], vec![]).is_err());
        assert!(Kernel::custom("x", 2, "alpha +* beta", vec![], vec![]).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let c = Kernel::custom("c", 4, "alpha*beta + 1", vec![], vec![SingularLocus::Diagonal]).unwrap();
        let json = serde_json::to_string(&c.spec()).unwrap();
        let back = Kernel::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.spec(), c.spec());
        assert_eq!(back.reduced(0.2, 0.3), c.reduced(0.2, 0.3));
        let g = Kernel::from_spec(&make_kernel("gg2").unwrap().spec()).unwrap();
        assert_eq!(g.tilde(0.2, 0.7), make_kernel("gg2").unwrap().tilde(0.2, 0.7));
    }
}
