//! The hard-disc and hard-sphere kernels written directly in energies as
//! three-branch formulas. Kept as an independent path to cross-check the
//! reduced min/max forms used by [`super::Kernel`].

use std::f64::consts::PI;

use crate::numerics::elliptic_k;

/// Two-dimensional kernel `W(ε_a, ε_b | ε_a − η, ε_b + η)` for
/// `−ε_b < η < ε_a`, with the branch for `ε_a ≤ ε_b` extended by the site swap.
pub fn gg2(ea: f64, eb: f64, eta: f64) -> f64 {
    if ea > eb {
        return gg2(eb, ea, -eta);
    }
    let pref = (2.0 / PI.powi(3)).sqrt();
    let k = |m: f64| elliptic_k(m).unwrap_or(f64::INFINITY);
    let v = if eta < ea - eb {
        (1.0 / ea).sqrt() * k(((eb + eta) / ea).sqrt())
    } else if eta < 0.0 {
        (1.0 / (eb + eta)).sqrt() * k((ea / (eb + eta)).sqrt())
    } else {
        (1.0 / eb).sqrt() * k(((ea - eta) / eb).sqrt())
    };
    pref * v
}

/// Three-dimensional kernel for `−ε_b < η < ε_a`.
pub fn gg3(ea: f64, eb: f64, eta: f64) -> f64 {
    let lo = 0f64.min(ea - eb);
    let hi = 0f64.max(ea - eb);
    let v = if eta < lo {
        ((eb + eta) / (ea * eb)).sqrt()
    } else if eta < hi {
        (1.0 / ea.max(eb)).sqrt()
    } else {
        ((ea - eta) / (ea * eb)).sqrt()
    };
    (PI / 8.0).sqrt() * v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_kernel;
    use rand::{Rng, SeedableRng};

    #[test]
    fn reduced_forms_agree_with_branches() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let g2 = make_kernel("gg2").unwrap();
        let g3 = make_kernel("gg3").unwrap();
        for _ in 0..10_000 {
            let ea: f64 = rng.gen_range(0.01..4.0);
            let eb: f64 = rng.gen_range(0.01..4.0);
            let eta = rng.gen_range(-eb..ea);
            let (r2, r3) = (gg2(ea, eb, eta), gg3(ea, eb, eta));
            let (w2, w3) = (g2.eval_W(ea, eb, eta).unwrap(), g3.eval_W(ea, eb, eta).unwrap());
            assert!((r2 - w2).abs() <= 1e-11 * w2, "gg2 ({ea},{eb},{eta}): {r2} vs {w2}");
            assert!((r3 - w3).abs() <= 1e-12 * w3, "gg3 ({ea},{eb},{eta}): {r3} vs {w3}");
        }
    }

    #[test]
    fn third_branch_example() {
        assert!((gg3(1.0, 1.0, 0.5) - (PI / 16.0).sqrt()).abs() < 1e-15);
    }
}
