//! Globally adaptive Gauss–Legendre quadrature in one and two dimensions.
//!
//! Every panel carries a fixed-order Gauss rule evaluated on the whole panel
//! and on its two halves; the difference is the panel error. The panel with
//! the largest error is bisected until the summed error meets the tolerance.
//! Known non-smooth points are passed as breakpoints so that no panel
//! straddles them.
//!
//! The unit-square integrator runs the 1D engine twice: the inner integral over
//! `β` is split at the points where declared [`SingularLocus`] curves cross the
//! current `α` line, and the outer integral over `α` is split where those
//! curves intersect each other.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Tolerances and rule order of the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Gauss–Legendre points per panel.
    pub rule_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 1 << 16,
            rule_order: 15,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0) {
            return Err(NumericsError::InvalidSpec("abs_tol must be > 0".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(NumericsError::InvalidSpec("rel_tol must be > 0".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(NumericsError::InvalidSpec(
                "max_subdivisions must be >= 1".into(),
            ));
        }
        if self.rule_order < 2 {
            return Err(NumericsError::InvalidSpec("rule_order must be >= 2".into()));
        }
        Ok(())
    }

    /// Tighter spec used for inner integrals of nested quadrature.
    pub fn inner(&self) -> Self {
        Self {
            abs_tol: self.abs_tol * 0.1,
            rel_tol: self.rel_tol * 0.1,
            ..*self
        }
    }
}

/// Outcome of an adaptive integration. A result that missed its tolerance is
/// returned with `converged == false` rather than as an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        }
    }

    /// Multiply value and error by a constant factor.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error: self.error * factor.abs(),
            ..self
        }
    }

    /// Sum of two independent results.
    pub fn plus(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error: self.error + other.error,
            converged: self.converged && other.converged,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

/// Curves in the unit square along which an integrand may be singular or
/// only piecewise smooth. The square's edges are always treated as
/// potentially singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularLocus {
    /// β = α
    Diagonal,
    /// β = 1 − α
    AntiDiagonal,
    /// α = 1/2
    AlphaMid,
    /// β = 1/2
    BetaMid,
}

impl SingularLocus {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "diagonal" => Some(Self::Diagonal),
            "anti-diagonal" => Some(Self::AntiDiagonal),
            "alpha-mid" => Some(Self::AlphaMid),
            "beta-mid" => Some(Self::BetaMid),
            _ => None,
        }
    }

    /// β-coordinate where this curve crosses the line at `alpha`, if any.
    pub fn beta_crossing(self, alpha: f64) -> Option<f64> {
        match self {
            Self::Diagonal => Some(alpha),
            Self::AntiDiagonal => Some(1.0 - alpha),
            Self::BetaMid => Some(0.5),
            Self::AlphaMid => None,
        }
    }

    /// Whether `(alpha, beta)` lies exactly on the curve.
    pub fn contains(self, alpha: f64, beta: f64) -> bool {
        match self {
            Self::Diagonal => alpha == beta,
            Self::AntiDiagonal => alpha + beta == 1.0,
            Self::AlphaMid => alpha == 0.5,
            Self::BetaMid => beta == 0.5,
        }
    }
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Physical nodes and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss sum over one panel, possibly carrying the error of inner integrals.
#[derive(Debug, Clone, Copy)]
struct PanelSum {
    value: f64,
    inner_error: f64,
    evaluations: usize,
    inner_converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    whole: PanelSum,
    left: PanelSum,
    right: PanelSum,
}

impl Panel {
    fn value(&self) -> f64 {
        self.left.value + self.right.value
    }

    fn error(&self) -> f64 {
        let v = self.value();
        if !v.is_finite() || !self.whole.value.is_finite() {
            return f64::INFINITY;
        }
        // Near an algebraic endpoint singularity x^{-1/2} the halves only gain
        // a factor √2, so the raw difference understates their error by ~2.4.
        ERROR_SAFETY * (v - self.whole.value).abs() + self.left.inner_error + self.right.inner_error
    }

    fn splittable(&self) -> bool {
        let m = 0.5 * (self.a + self.b);
        m > self.a && m < self.b && (self.b - self.a) > 8.0 * f64::EPSILON * self.a.abs().max(self.b.abs())
    }
}

const ERROR_SAFETY: f64 = 4.0;

struct HeapEntry {
    error: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Core adaptive engine. `breaks` must be sorted and include both endpoints.
fn adaptive<F>(
    panel_sum: F,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult, NumericsError>
where
    F: Fn(f64, f64) -> Result<PanelSumOut, NumericsError>,
{
    let eval = |a: f64, b: f64| -> Result<PanelSum, NumericsError> {
        let out = panel_sum(a, b)?;
        Ok(PanelSum {
            value: out.value,
            inner_error: out.inner_error,
            evaluations: out.evaluations,
            inner_converged: out.inner_converged,
        })
    };
    let make = |a: f64, b: f64, whole: PanelSum| -> Result<Panel, NumericsError> {
        let m = 0.5 * (a + b);
        let left = eval(a, m)?;
        let right = eval(m, b)?;
        Ok(Panel {
            a,
            b,
            whole,
            left,
            right,
        })
    };

    let mut panels: Vec<Panel> = Vec::new();
    let mut alive: Vec<bool> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let whole = eval(a, b)?;
        let p = make(a, b, whole)?;
        evaluations += p.whole.evaluations + p.left.evaluations + p.right.evaluations;
        heap.push(HeapEntry {
            error: p.error(),
            index: panels.len(),
        });
        panels.push(p);
        alive.push(true);
    }

    let totals = |panels: &[Panel], alive: &[bool]| -> (f64, f64) {
        let mut v = 0.0;
        let mut e = 0.0;
        for (p, _) in panels.iter().zip(alive).filter(|(_, &a)| a) {
            v += p.value();
            e += p.error();
        }
        (v, e)
    };

    let mut splits = 0usize;
    let (mut total, mut total_err) = totals(&panels, &alive);
    loop {
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if splits >= spec.max_subdivisions {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let p = panels[worst.index];
        if !p.splittable() {
            continue;
        }
        alive[worst.index] = false;
        let m = 0.5 * (p.a + p.b);
        let lp = make(p.a, m, p.left)?;
        let rp = make(m, p.b, p.right)?;
        evaluations += lp.left.evaluations
            + lp.right.evaluations
            + rp.left.evaluations
            + rp.right.evaluations;
        for child in [lp, rp] {
            heap.push(HeapEntry {
                error: child.error(),
                index: panels.len(),
            });
            panels.push(child);
            alive.push(true);
        }
        splits += 1;
        if splits.is_multiple_of(32) || heap.is_empty() {
            (total, total_err) = totals(&panels, &alive);
        } else {
            let old_err = p.error();
            total += lp.value() + rp.value() - p.value();
            total_err += lp.error() + rp.error() - old_err;
            if !total_err.is_finite() {
                (total, total_err) = totals(&panels, &alive);
            }
        }
    }

    // Deterministic final reduction ordered by position.
    let mut order: Vec<usize> = (0..panels.len()).filter(|&i| alive[i]).collect();
    order.sort_by(|&i, &j| panels[i].a.total_cmp(&panels[j].a));
    let mut value = 0.0;
    let mut error = 0.0;
    let mut inner_ok = true;
    for &i in &order {
        let p = &panels[i];
        value += p.value();
        error += p.error();
        inner_ok &= p.left.inner_converged && p.right.inner_converged;
    }
    let target = spec.abs_tol.max(spec.rel_tol * value.abs());
    Ok(QuadResult {
        value,
        error,
        converged: inner_ok && error <= target && value.is_finite(),
        evaluations,
    })
}

struct PanelSumOut {
    value: f64,
    inner_error: f64,
    evaluations: usize,
    inner_converged: bool,
}

fn sorted_breaks(a: f64, b: f64, interior: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(interior.len() + 2);
    v.push(a);
    v.extend(interior.iter().copied().filter(|&x| x > a && x < b));
    v.push(b);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// Infinite integrand values (integrable endpoint singularities hit by a node)
/// force subdivision; NaN is reported as an error naming the point.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult, NumericsError>
where
    F: Fn(f64) -> f64,
{
    integrate_1d_with_breaks(f, a, b, &[], spec)
}

/// [`integrate_1d`] with additional interior breakpoints.
pub fn integrate_1d_with_breaks<F>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult, NumericsError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if a == b {
        return Ok(QuadResult::zero());
    }
    if a > b {
        return integrate_1d_with_breaks(f, b, a, breaks, spec).map(|r| r.scaled(-1.0));
    }
    let rule = GaussRule::new(spec.rule_order);
    let pts = sorted_breaks(a, b, breaks);
    adaptive(
        |lo, hi| {
            let mut s = 0.0;
            for (x, w) in rule.mapped(lo, hi) {
                let y = f(x);
                if y.is_nan() {
                    return Err(NumericsError::NonFinite { x, y: None });
                }
                s += w * y;
            }
            Ok(PanelSumOut {
                value: s,
                inner_error: 0.0,
                evaluations: spec.rule_order,
                inner_converged: true,
            })
        },
        &pts,
        spec,
    )
}

/// [`integrate_1d_with_breaks`] after the substitution
/// `x = p + (q−p)·t²(3−2t)` on every piece `[p, q]` between breakpoints.
///
/// The map flattens algebraic endpoint singularities such as `|x−p|^{−1/2}`
/// into bounded integrands and keeps Gauss nodes away from the breakpoints,
/// which matters when a singularity sits at an interior point where floating
/// point cannot resolve offsets much below `1e-16·|p|`.
pub fn integrate_1d_graded<F>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult, NumericsError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if a == b {
        return Ok(QuadResult::zero());
    }
    if a > b {
        return integrate_1d_graded(f, b, a, breaks, spec).map(|r| r.scaled(-1.0));
    }
    let rule = GaussRule::new(spec.rule_order);
    let map = GradedMap {
        pts: sorted_breaks(a, b, breaks),
    };
    adaptive(
        |lo, hi| {
            let mut s = 0.0;
            let mut n = 0;
            for (x, w) in map.nodes(&rule, lo, hi) {
                let y = f(x);
                if y.is_nan() {
                    return Err(NumericsError::NonFinite { x, y: None });
                }
                s += w * y;
                n += 1;
            }
            Ok(PanelSumOut {
                value: s,
                inner_error: 0.0,
                evaluations: n,
                inner_converged: true,
            })
        },
        &map.t_breaks(),
        spec,
    )
}

/// Piecewise smoothstep map from `t ∈ [0, pieces]` onto the breakpoints.
struct GradedMap {
    pts: Vec<f64>,
}

impl GradedMap {
    fn pieces(&self) -> usize {
        self.pts.len() - 1
    }

    fn t_breaks(&self) -> Vec<f64> {
        (0..=self.pieces()).map(|i| i as f64).collect()
    }

    /// Physical nodes and weights (Jacobian included) of `rule` on the
    /// `t`-panel `[lo, hi]`. Nodes with zero Jacobian are dropped.
    fn nodes(&self, rule: &GaussRule, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let piece = (lo.floor() as usize).min(self.pieces() - 1);
        let (p, q) = (self.pts[piece], self.pts[piece + 1]);
        let h = q - p;
        rule.mapped(lo, hi)
            .filter_map(|(t, w)| {
                let u = t - piece as f64;
                // evaluate from the nearer endpoint to keep the offset exact
                let x = if u < 0.5 {
                    p + h * (u * u * (3.0 - 2.0 * u))
                } else {
                    let v = 1.0 - u;
                    q - h * (v * v * (3.0 - 2.0 * v))
                };
                let jac = 6.0 * h * u * (1.0 - u);
                (jac > 0.0).then_some((x, w * jac))
            })
            .collect()
    }
}

/// `∫₀^∞ f(x) dx` through the substitution `x = −scale·ln u`.
///
/// Suited to integrands carrying a factor like `exp(−x/scale)`, which becomes
/// polynomial in `u`. `breaks` are given in `x`.
pub fn integrate_semi_infinite<F>(
    f: F,
    scale: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let ubreaks: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| (-x / scale).exp())
        .collect();
    integrate_1d_graded(
        |u| {
            let x = -scale * u.ln();
            let y = f(x);
            if y == 0.0 {
                0.0
            } else {
                y * scale / u
            }
        },
        0.0,
        1.0,
        &ubreaks,
        spec,
    )
}

/// Adaptive integral of `f(α, β)` over the unit square.
///
/// The inner integral over `β` is computed at each outer node with
/// breakpoints where `loci` cross that line; the outer integral over `α` is
/// split at `α = 1/2` whenever any locus is declared. Both levels use the
/// smoothstep substitution of [`integrate_1d_graded`]. Inner evaluations at the
/// nodes of one outer panel run in parallel and are reduced in node order.
pub fn integrate_2d_unit_square<F>(
    f: F,
    loci: &[SingularLocus],
    spec: &QuadratureSpec,
) -> Result<QuadResult, NumericsError>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    spec.validate()?;
    let rule = GaussRule::new(spec.rule_order);
    let inner_spec = spec.inner();
    let outer = GradedMap {
        pts: if loci.is_empty() {
            vec![0.0, 1.0]
        } else {
            vec![0.0, 0.5, 1.0]
        },
    };

    let inner_at = |alpha: f64| -> Result<QuadResult, NumericsError> {
        let crossings: Vec<f64> = loci.iter().filter_map(|l| l.beta_crossing(alpha)).collect();
        integrate_1d_graded(|beta| f(alpha, beta), 0.0, 1.0, &crossings, &inner_spec).map_err(
            |e| match e {
                NumericsError::NonFinite { x, .. } => NumericsError::NonFinite {
                    x: alpha,
                    y: Some(x),
                },
                other => other,
            },
        )
    };

    adaptive(
        |lo, hi| {
            let nodes = outer.nodes(&rule, lo, hi);
            let inner: Vec<Result<QuadResult, NumericsError>> =
                nodes.par_iter().map(|&(x, _)| inner_at(x)).collect();
            let mut value = 0.0;
            let mut inner_error = 0.0;
            let mut evaluations = 0;
            let mut inner_converged = true;
            for ((_, w), r) in nodes.iter().zip(inner) {
                let r = r?;
                value += w * r.value;
                inner_error += w.abs() * r.error;
                evaluations += r.evaluations;
                inner_converged &= r.converged;
            }
            Ok(PanelSumOut {
                value,
                inner_error,
                evaluations,
                inner_converged,
            })
        },
        &outer.t_breaks(),
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let rule = GaussRule::new(15);
        let sw: f64 = rule.weights().iter().sum();
        assert!((sw - 2.0).abs() < 1e-14);
        // exact up to degree 29
        for p in [2, 10, 28] {
            let s: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(x, w)| w * x.powi(p))
                .sum();
            let exact = 2.0 / (p as f64 + 1.0);
            assert!((s - exact).abs() < 1e-14, "p={p}");
        }
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_1d(|x| x * x, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equal_limits_give_zero() {
        let r = integrate_1d(|_| 1.0, 0.3, 0.3, &QuadratureSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn reversed_limits_negate() {
        let s = QuadratureSpec::default();
        let r = integrate_1d(|x| x.exp(), 1.0, 0.0, &s).unwrap();
        assert!((r.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let r = integrate_1d(
            |eta: f64| eta.abs().powf(-0.5),
            -1.0,
            1.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 4.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn elliptic_singular_pattern_converges() {
        use crate::numerics::special::elliptic_k_from_complementary;
        // K(√x)/√x on (0,1): inverse-sqrt at 0 and log at 1
        let f = |x: f64| elliptic_k_from_complementary((1.0 - x).sqrt()) / x.sqrt();
        let loose = integrate_1d(f, 0.0, 1.0, &QuadratureSpec::with_tolerance(1e-8, 1e-8)).unwrap();
        let tight = integrate_1d(f, 0.0, 1.0, &QuadratureSpec::with_tolerance(1e-12, 1e-12)).unwrap();
        assert!(loose.converged && tight.converged);
        // the loose answer must honour its own tolerance and error estimate
        let diff = (loose.value - tight.value).abs();
        assert!(diff < 1e-8 * tight.value && diff < loose.error, "{loose:?} {tight:?}");
        // ∫₀¹ K(√x)/√x dx = 2∫₀¹ K(k) dk = 4G (Catalan)
        let catalan4 = 4.0 * 0.915_965_594_177_219;
        assert!((tight.value - catalan4).abs() < 1e-11, "{}", tight.value);
    }

    #[test]
    fn nan_is_reported_with_location() {
        let err = integrate_1d(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, &QuadratureSpec::default())
            .unwrap_err();
        match err {
            NumericsError::NonFinite { x, .. } => assert!(x > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let spec = QuadratureSpec {
            max_subdivisions: 2,
            ..QuadratureSpec::with_tolerance(1e-14, 1e-14)
        };
        let r = integrate_1d(|x: f64| (1.0 / x).sin() / x.sqrt(), 0.0, 1.0, &spec).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn invalid_spec_rejected() {
        let s = QuadratureSpec {
            rule_order: 1,
            ..QuadratureSpec::default()
        };
        assert!(integrate_1d(|x| x, 0.0, 1.0, &s).is_err());
        let s = QuadratureSpec {
            abs_tol: 0.0,
            ..QuadratureSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn semi_infinite_gamma_moment() {
        // ∫₀^∞ x^{1/2} e^{-x} dx = Γ(3/2) = √π/2
        let r = integrate_semi_infinite(|x| x.sqrt() * (-x).exp(), 1.0, &[], &QuadratureSpec::default())
            .unwrap();
        assert!(r.converged);
        assert!((r.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn unit_square_constant() {
        let r = integrate_2d_unit_square(|_, _| 1.0, &[], &QuadratureSpec::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unit_square_sqrt_min() {
        let f = |a: f64, b: f64| a.min(1.0 - a).min(b).min(1.0 - b).sqrt();
        let loci = [
            SingularLocus::Diagonal,
            SingularLocus::AntiDiagonal,
            SingularLocus::AlphaMid,
            SingularLocus::BetaMid,
        ];
        let r = integrate_2d_unit_square(f, &loci, &QuadratureSpec::default()).unwrap();
        assert!(r.converged, "{r:?}");
        let exact = 4.0 * 2f64.sqrt() / 15.0;
        assert!((r.value - exact).abs() < 1e-10, "{} vs {exact}", r.value);
    }

    #[test]
    fn unit_square_sqrt_min_monte_carlo_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            let v = a.min(1.0 - a).min(b).min(1.0 - b).sqrt();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let sd = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let r = integrate_2d_unit_square(
            |a, b| a.min(1.0 - a).min(b).min(1.0 - b).sqrt(),
            &[SingularLocus::Diagonal, SingularLocus::AntiDiagonal, SingularLocus::AlphaMid, SingularLocus::BetaMid],
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((r.value - mean).abs() < 5.0 * sd);
    }

    #[test]
    fn unit_square_antisymmetric_is_zero() {
        let g = |a: f64, b: f64| a * a * b + (3.0 * a).sin() * b.sqrt();
        let spec = QuadratureSpec::default();
        let r = integrate_2d_unit_square(|a, b| g(a, b) - g(b, a), &[SingularLocus::Diagonal], &spec).unwrap();
        assert!(r.value.abs() < 10.0 * spec.abs_tol, "{}", r.value);
        let sym = |a: f64, b: f64| (a * b).sqrt() + (a + b).cos();
        let r = integrate_2d_unit_square(|a, b| (a - b) * sym(a, b), &[], &spec).unwrap();
        assert!(r.value.abs() < 10.0 * spec.abs_tol);
    }

    #[test]
    fn unit_square_nan_reports_point() {
        let err = integrate_2d_unit_square(
            |a, b| if a > 0.7 && b < 0.2 { f64::NAN } else { a + b },
            &[],
            &QuadratureSpec::default(),
        )
        .unwrap_err();
        match err {
            NumericsError::NonFinite { x, y: Some(y) } => assert!(x > 0.7 && y < 0.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let f = |a: f64, b: f64| (a - b).abs().powf(-0.5) * (1.0 + a * b);
        let spec = QuadratureSpec::default();
        let r1 = integrate_2d_unit_square(f, &[SingularLocus::Diagonal], &spec).unwrap();
        let r2 = integrate_2d_unit_square(f, &[SingularLocus::Diagonal], &spec).unwrap();
        assert_eq!(r1.value.to_bits(), r2.value.to_bits());
        assert_eq!(r1.error.to_bits(), r2.error.to_bits());
    }
}
