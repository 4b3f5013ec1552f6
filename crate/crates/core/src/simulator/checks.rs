//! Stationarity and temperature-scaling checks built on the simulator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::stats::{ks_one_sample, ks_two_sample, mean_stderr, KsResult};
use crate::numerics::{gamma_cdf, RngStream};

use super::chain::{init_equilibrium, SimConfig};
use super::green_kubo::{run_green_kubo, GreenKuboEstimate};
use super::table::ExchangeSampler;
use super::SimError;

/// Smallest KS p-value accepted as stationary.
pub const INVARIANCE_P_MIN: f64 = 0.01;
/// Largest accepted neighbour-correlation z-score.
pub const CORRELATION_Z_MAX: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub kernel: String,
    pub events: u64,
    /// Site energies at `t = 0` against `t = t_max`.
    pub ks: KsResult,
    /// Site energies at `t = t_max` against the gamma marginal.
    pub ks_marginal: KsResult,
    /// `⟨ε_0 ε_1⟩ − ⟨ε_0⟩⟨ε_1⟩` at `t = t_max`, from disjoint neighbour pairs.
    pub correlation: f64,
    pub correlation_z: f64,
    pub max_energy_drift: f64,
    pub passed: bool,
}

/// Runs the chain from equilibrium to `t_max` and tests that the product
/// gamma measure is preserved.
pub fn equilibrium_invariance_test<S: ExchangeSampler + ?Sized>(
    cfg: &SimConfig,
    sampler: &S,
) -> Result<InvarianceReport, SimError> {
    cfg.validate()?;
    let runs: Vec<(Vec<f64>, Vec<f64>, u64, f64)> = (0..cfg.n_replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(cfg.seed, 1).child(r as u64).rng();
            let mut s = init_equilibrium(cfg, sampler, &mut rng)?;
            let start = s.energies.clone();
            let e0 = s.total_energy();
            s.run_until(sampler, cfg.t_max, &mut rng, |_| {});
            let drift = (s.total_energy() - e0).abs() / e0;
            Ok((start, s.energies, s.events, drift))
        })
        .collect::<Result<_, SimError>>()?;

    let before: Vec<f64> = runs.iter().flat_map(|r| r.0.iter().copied()).collect();
    let after: Vec<f64> = runs.iter().flat_map(|r| r.1.iter().copied()).collect();
    let ks = ks_two_sample(&before, &after);
    let (hd, t) = (sampler.half_d(), cfg.temperature);
    let ks_marginal = ks_one_sample(&after, |x| gamma_cdf(hd, t, x));

    // pairs (2k, 2k+1) share no site, so their products are independent under the null
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for r in &runs {
        for k in 0..r.1.len() / 2 {
            xs.push(r.1[2 * k]);
            ys.push(r.1[2 * k + 1]);
        }
    }
    let (mx, _) = mean_stderr(&xs);
    let (my, _) = mean_stderr(&ys);
    let products: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let (correlation, corr_se) = mean_stderr(&products);
    let correlation_z = correlation / corr_se;

    let report = InvarianceReport {
        kernel: cfg.kernel.clone(),
        events: runs.iter().map(|r| r.2).sum(),
        ks,
        ks_marginal,
        correlation,
        correlation_z,
        max_energy_drift: runs.iter().map(|r| r.3).fold(0.0, f64::max),
        passed: ks.p_value > INVARIANCE_P_MIN && correlation_z.abs() < CORRELATION_Z_MAX,
    };
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub temperature: f64,
    pub estimate: GreenKuboEstimate,
    /// `κ̂(T)/√T`
    pub scaled: f64,
    pub scaled_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Largest `|a − b| / ((a + b)/2)` over pairs of scaled values; absent for one row.
    pub max_relative_deviation: Option<f64>,
}

/// Runs the estimator at each temperature of `temperatures` using `template`
/// for everything else.
pub fn scaling_check<S: ExchangeSampler + ?Sized>(
    template: &SimConfig,
    sampler: &S,
    temperatures: &[f64],
) -> Result<ScalingTable, SimError> {
    if temperatures.is_empty() {
        return Err(SimError::InvalidConfig("no temperatures given".into()));
    }
    let mut rows = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let cfg = SimConfig {
            temperature: t,
            ..template.clone()
        };
        let estimate = run_green_kubo(&cfg, sampler)?.estimate;
        let rt = t.sqrt();
        rows.push(ScalingRow {
            temperature: t,
            scaled: estimate.kappa_hat / rt,
            scaled_stderr: estimate.stderr / rt,
            estimate,
        });
    }
    let mut dev: Option<f64> = None;
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let r = (a.scaled - b.scaled).abs() / (0.5 * (a.scaled + b.scaled));
            dev = Some(dev.map_or(r, |d| d.max(r)));
        }
    }
    Ok(ScalingTable {
        rows,
        max_relative_deviation: dev,
    })
}
