//! Piecewise Chebyshev interpolation with graded panels.
//!
//! Each panel stores samples at first-kind Chebyshev points and is evaluated
//! with the barycentric formula. First-kind points avoid panel endpoints, so
//! functions that are singular exactly at a breakpoint can still be tabulated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Interpolant over `[breaks[0], breaks[last]]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewiseChebyshev {
    breaks: Vec<f64>,
    order: usize,
    /// `order` samples per panel, panel-major.
    values: Vec<f64>,
    #[serde(skip)]
    nodes: Vec<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
}

fn reference_nodes(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order as f64;
    let nodes = (0..order)
        .map(|j| -((2.0 * j as f64 + 1.0) * std::f64::consts::PI / (2.0 * n)).cos())
        .collect();
    let weights = (0..order)
        .map(|j| {
            let s = ((2.0 * j as f64 + 1.0) * std::f64::consts::PI / (2.0 * n)).sin();
            if j % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect();
    (nodes, weights)
}

impl PiecewiseChebyshev {
    /// Tabulate `f` on every panel. Node evaluations run in parallel; the
    /// result does not depend on the thread count.
    pub fn build<F, E>(breaks: Vec<f64>, order: usize, f: F) -> Result<Self, E>
    where
        F: Fn(f64) -> Result<f64, E> + Sync,
        E: Send,
    {
        assert!(breaks.len() >= 2 && order >= 2);
        assert!(breaks.windows(2).all(|w| w[0] < w[1]), "breaks must increase");
        let (nodes, weights) = reference_nodes(order);
        let points: Vec<f64> = breaks
            .windows(2)
            .flat_map(|w| {
                let (a, b) = (w[0], w[1]);
                nodes
                    .iter()
                    .map(move |&t| 0.5 * (a + b) + 0.5 * (b - a) * t)
                    .collect::<Vec<_>>()
            })
            .collect();
        let values = points.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>, E>>()?;
        Ok(Self {
            breaks,
            order,
            values,
            nodes,
            weights,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().unwrap())
    }

    /// Evaluate at `x`, clamped to the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let p = match self.breaks.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(i) => i.min(self.breaks.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.breaks.len() - 2),
        };
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        let t = (2.0 * x - a - b) / (b - a);
        let vals = &self.values[p * self.order..(p + 1) * self.order];
        let (nodes, weights) = if self.nodes.is_empty() {
            // deserialized instance
            let (n, w) = reference_nodes(self.order);
            return barycentric(&n, &w, vals, t);
        } else {
            (&self.nodes, &self.weights)
        };
        barycentric(nodes, weights, vals, t)
    }
}

fn barycentric(nodes: &[f64], weights: &[f64], vals: &[f64], t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&x, &w), &v) in nodes.iter().zip(weights).zip(vals) {
        let dx = t - x;
        if dx == 0.0 {
            return v;
        }
        let c = w / dx;
        num += c * v;
        den += c;
    }
    num / den
}

/// Breakpoints on `[lo, hi]` refined geometrically toward each point of
/// `singular` (which must include `lo` and `hi`): between neighbouring points
/// `p < q` the panels end at `p + (m−p)·2^{−k}` and `q − (q−m)·2^{−k}` for
/// `k = 0..levels`, with `m` the midpoint.
pub fn graded_breaks(singular: &[f64], levels: u32) -> Vec<f64> {
    let mut pts: Vec<f64> = singular.to_vec();
    for w in singular.windows(2) {
        let (p, q) = (w[0], w[1]);
        let half = 0.5 * (q - p);
        for k in 0..=levels {
            let h = half * 0.5f64.powi(k as i32);
            pts.push(p + h);
            pts.push(q - h);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_smooth_function() {
        let f = PiecewiseChebyshev::build(vec![0.0, 0.5, 1.0], 16, |x| Ok::<_, ()>((3.0 * x).sin())).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((f.eval(x) - (3.0 * x).sin()).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn graded_panels_resolve_sqrt_endpoint() {
        let br = graded_breaks(&[0.0, 1.0], 50);
        let f = PiecewiseChebyshev::build(br, 16, |x: f64| Ok::<_, ()>(x.sqrt())).unwrap();
        for &x in &[1e-12, 1e-6, 0.01, 0.3, 0.999, 1.0 - 1e-9] {
            assert!((f.eval(x) - x.sqrt()).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn graded_breaks_are_sorted_and_include_ends() {
        let b = graded_breaks(&[0.0, 0.5, 1.0], 10);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 1.0);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(b.contains(&0.5));
    }

    #[test]
    fn errors_propagate() {
        let r = PiecewiseChebyshev::build(vec![0.0, 1.0], 4, |x| if x > 0.5 { Err("bad") } else { Ok(x) });
        assert!(r.is_err());
    }
}
