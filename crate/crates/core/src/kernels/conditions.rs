//! Randomised checks of the three defining conditions of a kernel:
//! homogeneity of degree −1/2, symmetry `W̄(α,β) = W̄(1−α,1−β)` and detailed
//! balance `W̃(α,β) = W̃(β,α)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Kernel, SimplexPoint};

/// Default relative tolerance for a condition to pass.
pub const DEFAULT_CONDITION_TOL: f64 = 1e-9;

/// Outcome for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    /// Largest relative residual over evaluated samples.
    pub worst_residual: f64,
    /// Coordinates of the worst sample: `(ε_a, ε_b, η, c)` for homogeneity,
    /// `(α, β)` otherwise.
    pub worst_at: Vec<f64>,
    pub samples: usize,
    /// Samples skipped because the kernel was not finite there.
    pub skipped: usize,
    pub pass: bool,
}

impl ConditionCheck {
    fn new() -> Self {
        Self {
            worst_residual: 0.0,
            worst_at: Vec::new(),
            samples: 0,
            skipped: 0,
            pass: false,
        }
    }

    fn record(&mut self, x: f64, y: f64, at: &[f64]) {
        if !(x.is_finite() && y.is_finite()) {
            self.skipped += 1;
            return;
        }
        self.samples += 1;
        let scale = x.abs().max(y.abs());
        let r = if scale == 0.0 { 0.0 } else { (x - y).abs() / scale };
        if r > self.worst_residual || self.worst_at.is_empty() {
            self.worst_residual = self.worst_residual.max(r);
            self.worst_at = at.to_vec();
        }
    }

    fn finish(&mut self, tol: f64) {
        self.pass = self.samples > 0 && self.worst_residual <= tol;
    }
}

/// Residuals of the three conditions at random sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kernel: String,
    pub d: u32,
    pub tolerance: f64,
    pub homogeneity: ConditionCheck,
    pub symmetry: ConditionCheck,
    pub detailed_balance: ConditionCheck,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.homogeneity.pass && self.symmetry.pass && self.detailed_balance.pass
    }
}

/// Check the conditions at `n` random points each. Energies are drawn
/// log-uniformly from `[10⁻², 10²]`, scale factors from `[10⁻³, 10³]` and
/// simplex points uniformly.
pub fn check_conditions<R: Rng + ?Sized>(k: &Kernel, n: usize, tol: f64, rng: &mut R) -> ConditionReport {
    let mut hom = ConditionCheck::new();
    let mut sym = ConditionCheck::new();
    let mut db = ConditionCheck::new();
    let log_uniform = |rng: &mut R, lo: f64, hi: f64| -> f64 {
        (rng.gen_range(lo.ln()..hi.ln())).exp()
    };
    for _ in 0..n.max(1) {
        let ea = log_uniform(rng, 1e-2, 1e2);
        let eb = log_uniform(rng, 1e-2, 1e2);
        let eta = rng.gen_range(-eb..ea);
        let c = log_uniform(rng, 1e-3, 1e3);
        match (k.eval_W(c * ea, c * eb, c * eta), k.eval_W(ea, eb, eta)) {
            (Ok(scaled), Ok(base)) => hom.record(scaled, base / c.sqrt(), &[ea, eb, eta, c]),
            _ => hom.skipped += 1,
        }

        let alpha: f64 = rng.gen_range(f64::EPSILON..1.0);
        let beta: f64 = rng.gen_range(f64::EPSILON..1.0);
        let p = SimplexPoint::new(alpha, beta);
        sym.record(k.reduced_at(&p), k.reduced_at(&p.swapped_sites()), &[alpha, beta]);
        db.record(k.tilde_at(&p), k.tilde_at(&p.transposed()), &[alpha, beta]);
    }
    for c in [&mut hom, &mut sym, &mut db] {
        c.finish(tol);
    }
    ConditionReport {
        kernel: k.name().to_string(),
        d: k.d(),
        tolerance: tol,
        homogeneity: hom,
        symmetry: sym,
        detailed_balance: db,
    }
}
