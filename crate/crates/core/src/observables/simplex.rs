//! Integrals over the reduced simplex in coordinates that keep `1−α`,
//! `1−β` and `α−β` exact next to the edges and the singular curves.

use std::cell::Cell;

use crate::kernels::{Kernel, SimplexPoint};
use crate::numerics::{integrate_1d_graded, QuadResult, QuadratureSpec, SingularLocus};

use super::ObservablesError;

/// Whether rounding has put `p` exactly onto one of the kernel's singular curves.
fn on_singular_curve(k: &Kernel, p: &SimplexPoint) -> bool {
    k.singular_loci().iter().any(|l| match l {
        SingularLocus::Diagonal => p.diff == 0.0,
        SingularLocus::AntiDiagonal => p.alpha == p.beta_c,
        SingularLocus::AlphaMid => p.alpha == 0.5,
        SingularLocus::BetaMid => p.beta == 0.5,
    })
}

/// `∫₀¹ f(α, β) dβ` at fixed `(α, 1−α)`.
///
/// The β-range is cut at the locus crossings and every piece is split in two
/// halves, each integrated in the offset `t` from its outer breakpoint. Offsets
/// stay exact down to subnormal size, so `α − β` and `1 − β` are resolved near
/// a singular crossing even when `α` itself is within `1e-12` of an edge.
pub(crate) fn line_integral<F>(
    k: &Kernel,
    alpha: f64,
    alpha_c: f64,
    f: F,
    spec: &QuadratureSpec,
) -> Result<QuadResult, ObservablesError>
where
    F: Fn(&SimplexPoint) -> f64,
{
    segment_integral(k, alpha, alpha_c, (0.0, 1.0), (1.0, 0.0), f, spec)
}

/// [`line_integral`] restricted to `β ∈ [lo, hi]`, with both ends given as
/// exact `(β, 1−β)` pairs.
pub(crate) fn segment_integral<F>(
    k: &Kernel,
    alpha: f64,
    alpha_c: f64,
    lo: (f64, f64),
    hi: (f64, f64),
    f: F,
    spec: &QuadratureSpec,
) -> Result<QuadResult, ObservablesError>
where
    F: Fn(&SimplexPoint) -> f64,
{
    // breakpoints as (β, 1−β) pairs, both exact
    let mut pts: Vec<(f64, f64)> = vec![lo, hi];
    for l in k.all_loci() {
        let c = match l {
            SingularLocus::Diagonal => (alpha, alpha_c),
            SingularLocus::AntiDiagonal => (alpha_c, alpha),
            SingularLocus::BetaMid => (0.5, 0.5),
            SingularLocus::AlphaMid => continue,
        };
        if c.0 > lo.0 && c.0 < hi.0 {
            pts.push(c);
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);

    let eval = |beta: f64, beta_c: f64, diff: f64| {
        let p = SimplexPoint {
            alpha,
            alpha_c,
            beta,
            beta_c,
            diff,
        };
        let v = f(&p);
        if !v.is_finite() && on_singular_curve(k, &p) {
            // the offset underflowed onto the curve; the point carries no weight
            return 0.0;
        }
        v
    };

    let mut total = QuadResult::zero();
    for win in pts.windows(2) {
        let ((p, pc), (q, qc)) = (win[0], win[1]);
        let half = 0.5 * (q - p);
        if half <= 0.0 {
            continue;
        }
        let (ap, aq) = (alpha - p, alpha - q);
        let left = integrate_1d_graded(|t| eval(p + t, pc - t, ap - t), 0.0, half, &[], spec)?;
        let right = integrate_1d_graded(|t| eval(q - t, qc + t, aq + t), 0.0, half, &[], spec)?;
        total = total.plus(left).plus(right);
    }
    Ok(total)
}

/// `∫₀¹∫₀¹ f(α, β) dβ dα`, iterated with [`line_integral`] inside.
///
/// The outer range is split at `α = ½` and each half is integrated in the
/// offset from its edge, so both `α` and `1−α` are exact on every line.
pub(crate) fn square_integral<F>(k: &Kernel, f: F, spec: &QuadratureSpec) -> Result<QuadResult, ObservablesError>
where
    F: Fn(&SimplexPoint) -> f64,
{
    let inner_spec = spec.inner();
    let inner_error = Cell::new(0.0f64);
    let inner_ok = Cell::new(true);
    let failure: Cell<Option<ObservablesError>> = Cell::new(None);
    let line = |a: f64, ac: f64| match line_integral(k, a, ac, &f, &inner_spec) {
        Ok(r) => {
            inner_error.set(inner_error.get().max(r.error));
            inner_ok.set(inner_ok.get() && r.converged);
            r.value
        }
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let lower = integrate_1d_graded(|t| line(t, 1.0 - t), 0.0, 0.5, &[], spec)?;
    let upper = integrate_1d_graded(|t| line(1.0 - t, t), 0.0, 0.5, &[], spec)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let r = lower.plus(upper);
    Ok(QuadResult {
        error: r.error + inner_error.get(),
        converged: r.converged && inner_ok.get(),
        ..r
    })
}
