//! Green–Kubo estimation of `κ(T)` from the growth of transferred energy.
//!
//! On a ring the total transfer `Q(t) = Σ_b Q_b(t)` satisfies
//! `Var Q(t) ≈ 2 N T² κ(T) t`. Writing `Q = M + A` with `A = ∫ Σ_b j_b` the
//! compensator and `M` a martingale with `⟨M⟩ = H = ∫ Σ_b h_b`, time reversal
//! of the equilibrium chain gives `E[Q²] = E[H] − E[A²]`. The headline
//! estimator fits that right-hand side, whose first term is nearly
//! deterministic, so it is much less noisy than the plain variance of `Q`.
//! Both are reported.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::stats::{fit_line, mean_stderr};
use crate::numerics::RngStream;

use super::chain::{init_equilibrium, EventRecord, SimConfig, Snapshot};
use super::table::ExchangeSampler;
use super::{diffusivity, SimError};

/// Half-window slope differences beyond this many standard errors raise the
/// nonlinearity warning.
pub const CURVATURE_Z: f64 = 4.0;

/// Stream id reserved for the bootstrap.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Measurements of one replica on the uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaTrajectory {
    pub replica: usize,
    pub snapshots: Vec<Snapshot>,
}

/// Lag statistics averaged over time origins and replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagPoint {
    pub tau: f64,
    /// `⟨ΔQ²⟩`
    pub var_q_tot: f64,
    /// `⟨ΔA²⟩`
    pub var_current_integral: f64,
    /// `⟨ΔH⟩`
    pub mean_h_integral: f64,
    /// `⟨ΔQ²⟩ / (2 N T² τ)`
    pub plain_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenKuboEstimate {
    pub kernel: String,
    pub temperature: f64,
    pub n_sites: usize,
    pub n_replicas: usize,
    pub kappa_hat: f64,
    pub stderr: f64,
    /// Slope of `⟨ΔQ²⟩` alone.
    pub kappa_plain: f64,
    pub kappa_plain_stderr: f64,
    /// Static part from the slope of `⟨ΔH⟩`.
    pub kappa_s_sim: f64,
    pub kappa_s_sim_stderr: f64,
    /// Dynamic correction from the slope of `⟨ΔA²⟩`; `κ̂ = κ_s,sim − gap`.
    pub gap: f64,
    pub gap_stderr: f64,
    /// `κ_s√T` of the sampled dynamics, known ahead of the run, minus the
    /// simulated gap. Its error is that of the gap alone, which makes it the
    /// sharper test of `κ < κ_s`.
    pub kappa_exact_static: Option<f64>,
    pub kappa_exact_static_stderr: Option<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
    pub lags: Vec<LagPoint>,
    pub curvature_z: f64,
    pub nonlinearity_warning: bool,
    pub event_rate_per_bond: f64,
    pub event_rate_stderr: f64,
    pub events_total: u64,
    /// Largest relative change of the total energy over a replica.
    pub max_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenKuboRun {
    pub estimate: GreenKuboEstimate,
    pub trajectories: Vec<ReplicaTrajectory>,
}

/// Runs one replica from equilibrium, calling `on_event` after every exchange.
pub fn run_replica<S, F>(cfg: &SimConfig, sampler: &S, replica: usize, mut on_event: F) -> Result<ReplicaTrajectory, SimError>
where
    S: ExchangeSampler + ?Sized,
    F: FnMut(&EventRecord),
{
    let mut rng = RngStream::new(cfg.seed, 0).child(replica as u64).rng();
    let mut state = init_equilibrium(cfg, sampler, &mut rng)?;
    let times = cfg.measurement_times();
    let mut snapshots = Vec::with_capacity(times.len());
    snapshots.push(state.snapshot());
    for &t in &times[1..] {
        state.run_until(sampler, t, &mut rng, &mut on_event);
        snapshots.push(state.snapshot());
    }
    Ok(ReplicaTrajectory { replica, snapshots })
}

fn check_wrap_around(cfg: &SimConfig, kappa: f64, d: u32) -> Result<(), SimError> {
    let spread = (2.0 * diffusivity(kappa, cfg.temperature, d)? * cfg.t_max).sqrt();
    let limit = cfg.n_sites as f64 / 4.0;
    if spread > limit {
        return Err(SimError::WrapAround {
            spread,
            limit,
            suggested: (4.0 * spread).ceil() as usize,
        });
    }
    Ok(())
}

/// `(⟨ΔQ²⟩, ⟨ΔA²⟩, ⟨ΔH⟩)` at lag `lag` over all origins of one replica.
fn lag_moments(s: &[Snapshot], lag: usize) -> [f64; 3] {
    let origins = s.len() - lag;
    let mut acc = [0.0; 3];
    for o in 0..origins {
        let (a, b) = (&s[o], &s[o + lag]);
        acc[0] += (b.q_tot - a.q_tot).powi(2);
        acc[1] += (b.current_integral - a.current_integral).powi(2);
        acc[2] += b.h_integral - a.h_integral;
    }
    acc.map(|v| v / origins as f64)
}

/// Per-replica rates of `[H − A², Q², H, A²]`, followed by the second-half
/// minus first-half slopes of `Q²` and `A²`.
///
/// `E[ΔH]` is exactly linear in the lag for a stationary chain, so its rate
/// is taken from the whole run; the other columns are window slopes.
fn replica_slopes(taus: &[f64], moments: &[[f64; 3]], h_rate: f64) -> [f64; 6] {
    let fit = |lo: usize, hi: usize, c: usize| -> f64 {
        let ys: Vec<f64> = moments[lo..hi].iter().map(|m| m[c]).collect();
        fit_line(&taus[lo..hi], &ys).slope
    };
    let (n, mid) = (taus.len(), taus.len() / 2);
    let (q, a) = (fit(0, n, 0), fit(0, n, 1));
    [
        h_rate - a,
        q,
        h_rate,
        a,
        fit(mid, n, 0) - fit(0, mid + 1, 0),
        fit(mid, n, 1) - fit(0, mid + 1, 1),
    ]
}

/// Replica mean of `y` adjusted by the control `c`, whose exact mean is 0:
/// `ȳ − b c̄` with `b` the least-squares coefficient of `y` on `c`.
fn controlled_mean(y: &[f64], c: &[f64], pick: &[usize]) -> f64 {
    let n = pick.len() as f64;
    let ym = pick.iter().map(|&r| y[r]).sum::<f64>() / n;
    let cm = pick.iter().map(|&r| c[r]).sum::<f64>() / n;
    let scc: f64 = pick.iter().map(|&r| (c[r] - cm).powi(2)).sum();
    if !(scc > 0.0) {
        return ym;
    }
    let scy: f64 = pick.iter().map(|&r| (c[r] - cm) * (y[r] - ym)).sum();
    ym - scy / scc * cm
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Runs the ensemble and estimates `κ(T)`.
pub fn run_green_kubo<S: ExchangeSampler + ?Sized>(
    cfg: &SimConfig,
    sampler: &S,
) -> Result<GreenKuboRun, SimError> {
    cfg.validate()?;
    if cfg.n_replicas < 2 {
        return Err(SimError::InvalidConfig("the bootstrap error needs at least 2 replicas".into()));
    }
    let d = (2.0 * sampler.half_d()).round() as u32;
    if let Some(ks) = sampler.static_kappa_s() {
        check_wrap_around(cfg, ks * cfg.temperature.sqrt(), d)?;
    }
    let trajectories: Vec<ReplicaTrajectory> = (0..cfg.n_replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, sampler, r, |_| {}))
        .collect::<Result<_, _>>()?;
    let estimate = estimate_from_trajectories(cfg, sampler.half_d(), sampler.static_kappa_s(), &trajectories)?;
    if sampler.static_kappa_s().is_none() {
        check_wrap_around(cfg, estimate.kappa_s_sim.max(0.0), d)?;
    }
    Ok(GreenKuboRun { estimate, trajectories })
}

/// Green–Kubo estimate from recorded trajectories of a chain with
/// `d = 2·half_d` and, when known, unit-temperature static constant `static_kappa_s`.
///
/// Replica slopes are averaged with the total energy as a control variate:
/// its law `Gamma(N d/2, T)` is known exactly and it accounts for most of the
/// replica-to-replica spread of the energy-weighted rates.
pub fn estimate_from_trajectories(
    cfg: &SimConfig,
    half_d: f64,
    static_kappa_s: Option<f64>,
    trajectories: &[ReplicaTrajectory],
) -> Result<GreenKuboEstimate, SimError> {
    let m = cfg.measurements;
    let dt = cfg.t_max / m as f64;
    let lag_lo = ((cfg.fit_window[0] * m as f64).round() as usize).max(1);
    let lag_hi = ((cfg.fit_window[1] * m as f64).round() as usize).min(m);
    if lag_hi < lag_lo + 3 {
        return Err(SimError::InvalidConfig(format!(
            "fit window covers lags {lag_lo}..={lag_hi}; refine the measurement grid"
        )));
    }
    let scale = 2.0 * cfg.n_sites as f64 * cfg.temperature.powi(2);
    let nr = trajectories.len();

    let all: Vec<Vec<[f64; 3]>> = trajectories
        .par_iter()
        .map(|tr| (0..=m).map(|l| lag_moments(&tr.snapshots, l)).collect())
        .collect();
    let lags: Vec<LagPoint> = (0..=m)
        .map(|l| {
            let mut acc = [0.0; 3];
            for r in &all {
                for c in 0..3 {
                    acc[c] += r[l][c] / nr as f64;
                }
            }
            let tau = l as f64 * dt;
            LagPoint {
                tau,
                var_q_tot: acc[0],
                var_current_integral: acc[1],
                mean_h_integral: acc[2],
                plain_ratio: if l == 0 { 0.0 } else { acc[0] / (scale * tau) },
            }
        })
        .collect();

    let taus: Vec<f64> = (lag_lo..=lag_hi).map(|l| l as f64 * dt).collect();
    let per_replica: Vec<[f64; 6]> = all
        .iter()
        .zip(trajectories)
        .map(|(r, tr)| {
            let last = tr.snapshots[tr.snapshots.len() - 1];
            replica_slopes(&taus, &r[lag_lo..=lag_hi], last.h_integral / last.t)
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..6).map(|c| per_replica.iter().map(|y| y[c]).collect()).collect();
    let mean_energy = cfg.n_sites as f64 * half_d * cfg.temperature;
    let control: Vec<f64> = trajectories
        .iter()
        .map(|t| t.snapshots[0].total_energy / mean_energy - 1.0)
        .collect();
    let estimate = |pick: &[usize]| -> [f64; 6] { std::array::from_fn(|c| controlled_mean(&columns[c], &control, pick)) };

    let identity: Vec<usize> = (0..nr).collect();
    let point = estimate(&identity);
    let mut rng = RngStream::new(cfg.seed, 0).child(BOOTSTRAP_STREAM).rng();
    let boot: Vec<[f64; 6]> = (0..cfg.bootstrap_resamples.max(2))
        .map(|_| {
            let pick: Vec<usize> = (0..nr).map(|_| rng.gen_range(0..nr)).collect();
            estimate(&pick)
        })
        .collect();
    let se = |i: usize| std_dev(&boot.iter().map(|b| b[i]).collect::<Vec<_>>());
    let curvature_z = (point[4] / se(4)).abs().max((point[5] / se(5)).abs());

    let rates: Vec<f64> = trajectories
        .iter()
        .map(|t| t.snapshots.last().map_or(0, |s| s.events) as f64 / (cfg.n_sites as f64 * cfg.t_max))
        .collect();
    let (event_rate, event_rate_se) = mean_stderr(&rates);
    let events_total = trajectories
        .iter()
        .map(|t| t.snapshots.last().map_or(0, |s| s.events))
        .sum();
    let max_energy_drift = trajectories
        .iter()
        .map(|t| {
            let (a, b) = (t.snapshots[0].total_energy, t.snapshots[t.snapshots.len() - 1].total_energy);
            (b - a).abs() / a
        })
        .fold(0.0, f64::max);

    let stderr = se(0) / scale;
    if !(point[0].is_finite() && stderr > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "degenerate estimate (slope {}, stderr {stderr}); the run is too short",
            point[0] / scale
        )));
    }
    Ok(GreenKuboEstimate {
        kernel: cfg.kernel.clone(),
        temperature: cfg.temperature,
        n_sites: cfg.n_sites,
        n_replicas: nr,
        kappa_hat: point[0] / scale,
        stderr,
        kappa_plain: point[1] / scale,
        kappa_plain_stderr: se(1) / scale,
        kappa_s_sim: point[2] / scale,
        kappa_s_sim_stderr: se(2) / scale,
        gap: point[3] / scale,
        gap_stderr: se(3) / scale,
        kappa_exact_static: static_kappa_s.map(|ks| ks * cfg.temperature.sqrt() - point[3] / scale),
        kappa_exact_static_stderr: static_kappa_s.map(|_| se(3) / scale),
        t_lo: lag_lo as f64 * dt,
        t_hi: lag_hi as f64 * dt,
        lags,
        curvature_z,
        nonlinearity_warning: curvature_z > CURVATURE_Z,
        event_rate_per_bond: event_rate,
        event_rate_stderr: event_rate_se,
        events_total,
        max_energy_drift,
    })
}

#[derive(Serialize)]
struct TrajectoryRecord {
    replica: usize,
    t: f64,
    q_tot: f64,
    total_energy: f64,
}

/// One JSON line per replica and measurement time.
pub fn write_trajectories_jsonl<W: Write>(out: &mut W, trajectories: &[ReplicaTrajectory]) -> Result<(), SimError> {
    for tr in trajectories {
        for s in &tr.snapshots {
            let rec = TrajectoryRecord {
                replica: tr.replica,
                t: s.t,
                q_tot: s.q_tot,
                total_energy: s.total_energy,
            };
            let line = serde_json::to_string(&rec).map_err(|e| SimError::Io(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}
