//! Exchange samplers.
//!
//! [`ExchangeTable`] discretizes the symmetric kernel `W̃` on an `n × n` grid
//! of cells. On cell `(i, j)` it uses `W̃_tab(α,β) = m_ij g(α) g(β) / (G_i G_j)`
//! with `g(x) = (x(1−x))^{d/2−1}`, `m_ij = ∫∫_cell W̃` and `G_i = ∫_cell g`.
//! `W̃_tab` is symmetric by construction, so the tabulated chain satisfies
//! detailed balance with respect to the product gamma measure exactly, and its
//! pair rate, current and second moment are available in closed form:
//!
//! ```text
//! ν̄_tab(α) = r_i,  J̄_tab(α) = α r_i − b1_i,  H̄_tab(α) = α² r_i − 2α b1_i + b2_i
//! r_i = Σ_j m_ij / G_i,  b1_i = Σ_j m_ij (G1_j/G_j) / G_i,  b2_i = Σ_j m_ij (G2_j/G_j) / G_i
//! ```
//!
//! where `G1`, `G2` are the first and second moments of `g` over a cell.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{check_conditions, Kernel, SimplexPoint};
use crate::numerics::special::gamma;
use crate::numerics::quadrature::GaussRule;
use crate::numerics::{integrate_1d_graded, QuadratureSpec, RngStream};
use crate::observables::ReducedProfile;
use crate::observables::simplex::segment_integral;

use super::SimError;

pub const DEFAULT_CELLS: usize = 2048;
/// Sampled fractions are clamped to `[BETA_CLAMP, 1 − BETA_CLAMP]`.
pub const BETA_CLAMP: f64 = 1.0 / (1u64 << 40) as f64;

/// Source of post-exchange fractions together with the matching reduced
/// rate, current and second moment, so that the simulated current is the
/// exact conditional mean of the simulated jumps.
pub trait ExchangeSampler: Send + Sync {
    fn half_d(&self) -> f64;
    fn nu_bar(&self, alpha: f64) -> f64;
    fn j_bar(&self, alpha: f64) -> f64;
    fn h_bar(&self, alpha: f64) -> f64;
    /// Post-exchange fraction `β` of the left site given its pre-exchange fraction `α`.
    fn sample_beta(&self, alpha: f64, rng: &mut ChaCha8Rng) -> f64;
    /// `κ_s` of the sampled dynamics at unit temperature, when known ahead of a run.
    fn static_kappa_s(&self) -> Option<f64> {
        None
    }
}

fn clamp_beta(beta: f64) -> f64 {
    beta.clamp(BETA_CLAMP, 1.0 - BETA_CLAMP)
}

/// Diagnostics of a table build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableDiagnostics {
    pub cells: usize,
    /// `κ_f` of the tabulated kernel, from its total cell mass.
    pub kappa_f: f64,
    /// `κ_s` of the tabulated kernel, from its closed-form second moment.
    pub kappa_s: f64,
    /// Largest error estimate of an adaptively integrated cell.
    pub max_cell_error: f64,
}

/// Inverse-CDF sampling table for one kernel.
#[derive(Debug, Clone)]
pub struct ExchangeTable {
    kernel: String,
    half_d: f64,
    n: usize,
    width: f64,
    /// Row-wise cumulative cell masses, `n × n`.
    cdf: Vec<f64>,
    rate: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    /// Bound of `g` on each cell, for rejection sampling inside a cell.
    g_max: Vec<f64>,
    /// `I_x(h, h)` at the inner edge of the first cell.
    edge_beta_reg: f64,
    pub diagnostics: TableDiagnostics,
}

impl ExchangeTable {
    pub fn build(k: &Kernel, cells: usize) -> Result<Self, SimError> {
        if cells < 4 || !cells.is_multiple_of(2) {
            return Err(SimError::InvalidConfig(format!("table needs an even cell count ≥ 4, got {cells}")));
        }
        let n = cells;
        let width = 1.0 / n as f64;
        let hd = k.half_d();
        let edge = |i: usize| i as f64 * width;

        // moments of g on every cell
        let g = move |x: f64| if hd == 1.0 { 1.0 } else { (x * (1.0 - x)).powf(hd - 1.0) };
        let gspec = QuadratureSpec::with_tolerance(1e-15, 1e-12);
        let mut gm = vec![[0.0f64; 3]; n];
        for (i, m) in gm.iter_mut().enumerate() {
            let (a, b) = (edge(i), edge(i + 1));
            if hd == 1.0 {
                *m = [b - a, (b * b - a * a) / 2.0, (b * b * b - a * a * a) / 3.0];
            } else {
                for (p, slot) in m.iter_mut().enumerate() {
                    *slot = integrate_1d_graded(|x| g(x) * x.powi(p as i32), a, b, &[], &gspec)?.value;
                }
            }
        }
        let g_max: Vec<f64> = (0..n).map(|i| g(edge(i)).max(g(edge(i + 1)))).collect();

        let masses = cell_masses(k, n)?;
        let max_cell_error = masses.1;
        let m = masses.0;

        let mut cdf = vec![0.0; n * n];
        let mut rate = vec![0.0; n];
        let mut b1 = vec![0.0; n];
        let mut b2 = vec![0.0; n];
        let mut total_mass = 0.0;
        let mut second = 0.0;
        for i in 0..n {
            let row = &m[i * n..(i + 1) * n];
            let mut acc = 0.0;
            let (mut s1, mut s2) = (0.0, 0.0);
            for j in 0..n {
                acc += row[j];
                cdf[i * n + j] = acc;
                s1 += row[j] * gm[j][1] / gm[j][0];
                s2 += row[j] * gm[j][2] / gm[j][0];
            }
            rate[i] = acc / gm[i][0];
            b1[i] = s1 / gm[i][0];
            b2[i] = s2 / gm[i][0];
            total_mass += acc;
            second += rate[i] * gm[i][2] - 2.0 * b1[i] * gm[i][1] + b2[i] * gm[i][0];
        }
        let g2 = gamma(hd).powi(2);
        let d = 2.0 * hd;
        let diagnostics = TableDiagnostics {
            cells: n,
            kappa_f: gamma(d + 0.5) / g2 * total_mass,
            kappa_s: 0.5 * gamma(d + 2.5) / g2 * second,
            max_cell_error,
        };
        Ok(Self {
            kernel: k.name().to_string(),
            half_d: hd,
            n,
            width,
            cdf,
            rate,
            b1,
            b2,
            g_max,
            edge_beta_reg: statrs::function::beta::beta_reg(hd, hd, width),
            diagnostics,
        })
    }

    pub fn kernel_name(&self) -> &str {
        &self.kernel
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    fn cell(&self, alpha: f64) -> usize {
        ((alpha * self.n as f64) as usize).min(self.n - 1)
    }

    /// A point of cell `j` drawn with density proportional to `g`.
    fn sample_in_cell(&self, j: usize, rng: &mut ChaCha8Rng) -> f64 {
        let lo = j as f64 * self.width;
        if self.half_d == 1.0 {
            return lo + self.width * rng.gen::<f64>();
        }
        if j == 0 || j == self.n - 1 {
            let x = self.sample_edge_cell(rng);
            return if j == 0 { x } else { 1.0 - x };
        }
        let g = |x: f64| (x * (1.0 - x)).powf(self.half_d - 1.0);
        loop {
            let x = lo + self.width * rng.gen::<f64>();
            if rng.gen::<f64>() * self.g_max[j] <= g(x) {
                return x;
            }
        }
    }

    /// Inversion of `I_x(h,h)` on the first cell, by bisection.
    fn sample_edge_cell(&self, rng: &mut ChaCha8Rng) -> f64 {
        let target = rng.gen::<f64>() * self.edge_beta_reg;
        let (mut lo, mut hi) = (0.0, self.width);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if statrs::function::beta::beta_reg(self.half_d, self.half_d, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl ExchangeSampler for ExchangeTable {
    fn half_d(&self) -> f64 {
        self.half_d
    }

    fn nu_bar(&self, alpha: f64) -> f64 {
        self.rate[self.cell(alpha)]
    }

    fn j_bar(&self, alpha: f64) -> f64 {
        let i = self.cell(alpha);
        alpha * self.rate[i] - self.b1[i]
    }

    fn h_bar(&self, alpha: f64) -> f64 {
        let i = self.cell(alpha);
        (alpha * (alpha * self.rate[i] - 2.0 * self.b1[i]) + self.b2[i]).max(0.0)
    }

    fn sample_beta(&self, alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
        let i = self.cell(alpha);
        let row = &self.cdf[i * self.n..(i + 1) * self.n];
        let u = rng.gen::<f64>() * row[self.n - 1];
        let j = row.partition_point(|&c| c <= u).min(self.n - 1);
        clamp_beta(self.sample_in_cell(j, rng))
    }

    fn static_kappa_s(&self) -> Option<f64> {
        Some(self.diagnostics.kappa_s)
    }
}

/// Cell masses `m_ij` (row-major) and the largest adaptive error estimate.
///
/// Only cells with `i ≤ j` and `i + j ≤ n − 1` are integrated; the rest
/// follow from `W̃(α,β) = W̃(β,α) = W̃(1−α,1−β)`.
fn cell_masses(k: &Kernel, n: usize) -> Result<(Vec<f64>, f64), SimError> {
    let width = 1.0 / n as f64;
    let rule6 = GaussRule::new(6);
    let rule12 = GaussRule::new(12);
    // cell masses are needed to ~1e-9 relative; tighter targets hit the
    // rounding floor of 1 − α next to the anti-diagonal
    let spec = QuadratureSpec {
        rule_order: 8,
        max_subdivisions: 400,
        ..QuadratureSpec::with_tolerance(1e-12 * width * width, 1e-9)
    };
    let rows: Vec<Result<(Vec<f64>, f64), SimError>> = (0..n / 2)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let mut worst = 0.0f64;
            for j in i..(n - i) {
                let (a0, a1) = (i as f64 * width, (i + 1) as f64 * width);
                let (b0, b1) = (j as f64 * width, (j + 1) as f64 * width);
                // cells on a singular line or touching one at a corner
                let on_line = j - i <= 1 || n - 1 - i - j <= 1;
                let edge = i == 0 || j == n - 1;
                row[j] = if on_line || edge {
                    let (v, e) = adaptive_cell(k, a0, a1, b0, b1, &spec)?;
                    worst = worst.max(e);
                    v
                } else {
                    let near = j - i == 2 || n - 1 - i - j == 2;
                    tensor_cell(k, a0, a1, b0, b1, if near { &rule12 } else { &rule6 })
                };
            }
            Ok((row, worst))
        })
        .collect();
    let mut m = vec![0.0; n * n];
    let mut worst = 0.0f64;
    for (i, r) in rows.into_iter().enumerate() {
        let (row, e) = r?;
        worst = worst.max(e);
        for j in i..(n - i) {
            let v = row[j];
            for (a, b) in [(i, j), (j, i), (n - 1 - i, n - 1 - j), (n - 1 - j, n - 1 - i)] {
                m[a * n + b] = v;
            }
        }
    }
    Ok((m, worst))
}

fn tensor_cell(k: &Kernel, a0: f64, a1: f64, b0: f64, b1: f64, rule: &GaussRule) -> f64 {
    let mut s = 0.0;
    for (a, wa) in rule.mapped(a0, a1) {
        for (b, wb) in rule.mapped(b0, b1) {
            s += wa * wb * k.tilde_at(&SimplexPoint::new(a, b));
        }
    }
    s
}

fn adaptive_cell(k: &Kernel, a0: f64, a1: f64, b0: f64, b1: f64, spec: &QuadratureSpec) -> Result<(f64, f64), SimError> {
    let inner_spec = spec.inner();
    let failure = std::cell::Cell::new(None);
    let inner_err = std::cell::Cell::new(0.0f64);
    // the canonical cells have α ≤ ½, where 1 − α is exact enough; cell
    // edges are dyadic, so their complements are exact
    let outer = integrate_1d_graded(
        |a| match segment_integral(k, a, 1.0 - a, (b0, 1.0 - b0), (b1, 1.0 - b1), |p| k.tilde_at(p), &inner_spec) {
            Ok(r) => {
                inner_err.set(inner_err.get() + r.error);
                r.value
            }
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        },
        a0,
        a1,
        &[],
        spec,
    )?;
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    Ok((outer.value, outer.error + inner_err.get() * (a1 - a0)))
}

/// Tables built ahead of simulation, keyed by kernel name.
#[derive(Debug, Default, Clone)]
pub struct TableRegistry {
    tables: HashMap<String, Arc<ExchangeTable>>,
}

/// Samples used to confirm the kernel conditions before tabulating.
const PRECHECK_SAMPLES: usize = 2000;

impl TableRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds (or returns the cached) table for `k`.
    ///
    /// Refuses kernels that fail the symmetry or detailed-balance checks,
    /// since the table would silently symmetrize them.
    pub fn precompute(&mut self, k: &Kernel, cells: usize) -> Result<Arc<ExchangeTable>, SimError> {
        if let Some(t) = self.tables.get(k.name()) {
            if t.cells() == cells {
                return Ok(t.clone());
            }
        }
        let mut rng = RngStream::new(0x7ab1e, 0).rng();
        let report = check_conditions(k, PRECHECK_SAMPLES, crate::kernels::DEFAULT_CONDITION_TOL, &mut rng);
        if !report.all_pass() {
            return Err(SimError::InvalidKernel(k.name().to_string()));
        }
        let t = Arc::new(ExchangeTable::build(k, cells)?);
        self.tables.insert(k.name().to_string(), t.clone());
        Ok(t)
    }

    pub fn get(&self, name: &str) -> Result<Arc<ExchangeTable>, SimError> {
        self.tables
            .get(name)
            .cloned()
            .ok_or_else(|| SimError::TableMissing(name.to_string()))
    }
}

/// `β ~ W̄(α,·)/ν̄(α)` from the precomputed table of `k`.
pub fn sample_exchange(registry: &TableRegistry, k: &Kernel, alpha: f64, rng: &mut ChaCha8Rng) -> Result<f64, SimError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimError::InvalidConfig(format!("fraction must lie in (0, 1), got {alpha}")));
    }
    Ok(registry.get(k.name())?.sample_beta(alpha, rng))
}

/// Reference sampler inverting the exact conditional CDF by bisection.
///
/// Slow; used to validate tables and as a drop-in sampler for short runs.
#[derive(Debug, Clone)]
pub struct InversionSampler {
    kernel: Kernel,
    profile: ReducedProfile,
    spec: QuadratureSpec,
}

impl InversionSampler {
    pub fn new(k: &Kernel, spec: &QuadratureSpec) -> Result<Self, SimError> {
        Ok(Self {
            kernel: k.clone(),
            profile: ReducedProfile::build(k, spec)?,
            spec: *spec,
        })
    }

    /// `∫₀^β W̄(α, b) db`.
    pub fn partial_mass(&self, alpha: f64, beta: f64) -> f64 {
        let crossings: Vec<f64> = self
            .kernel
            .all_loci()
            .iter()
            .filter_map(|l| l.beta_crossing(alpha))
            .filter(|&c| c > 0.0 && c < beta)
            .collect();
        let singular = !self.kernel.singular_loci().is_empty();
        integrate_1d_graded(
            |b| {
                let v = self.kernel.reduced(alpha, b);
                if !v.is_finite() && singular {
                    0.0
                } else {
                    v
                }
            },
            0.0,
            beta,
            &crossings,
            &self.spec,
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
    }

    /// Exact conditional CDF of `β` given `α`.
    pub fn cdf(&self, alpha: f64, beta: f64) -> f64 {
        self.partial_mass(alpha, beta) / self.partial_mass(alpha, 1.0)
    }
}

impl ExchangeSampler for InversionSampler {
    fn half_d(&self) -> f64 {
        self.kernel.half_d()
    }

    fn nu_bar(&self, alpha: f64) -> f64 {
        self.profile.nu_bar(alpha)
    }

    fn j_bar(&self, alpha: f64) -> f64 {
        self.profile.j_bar(alpha)
    }

    fn h_bar(&self, alpha: f64) -> f64 {
        self.profile.h_bar(alpha)
    }

    fn sample_beta(&self, alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
        let total = self.partial_mass(alpha, 1.0);
        let target = rng.gen::<f64>() * total;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if self.partial_mass(alpha, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clamp_beta(0.5 * (lo + hi))
    }
}

/// Negative control: a table sampler whose fractions are distorted to `β^power`
/// while rates and currents are left unchanged, which breaks stationarity.
#[derive(Debug, Clone)]
pub struct SkewedSampler {
    pub inner: Arc<ExchangeTable>,
    pub power: f64,
}

impl ExchangeSampler for SkewedSampler {
    fn half_d(&self) -> f64 {
        self.inner.half_d()
    }

    fn nu_bar(&self, alpha: f64) -> f64 {
        self.inner.nu_bar(alpha)
    }

    fn j_bar(&self, alpha: f64) -> f64 {
        self.inner.j_bar(alpha)
    }

    fn h_bar(&self, alpha: f64) -> f64 {
        self.inner.h_bar(alpha)
    }

    fn sample_beta(&self, alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
        clamp_beta(self.inner.sample_beta(alpha, rng).powf(self.power))
    }
}
