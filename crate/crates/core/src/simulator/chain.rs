//! Ring state, equilibrium initialization and the event-driven step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::stats::NeumaierSum;
use crate::numerics::sample_gamma;

use super::sumtree::SumTree;
use super::table::{ExchangeSampler, DEFAULT_CELLS};
use super::SimError;

/// Parameters of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub kernel: String,
    /// Ring size `N`.
    pub n_sites: usize,
    pub temperature: f64,
    pub t_max: f64,
    pub n_replicas: usize,
    pub seed: u64,
    /// Number of intervals of the uniform measurement grid on `[0, t_max]`.
    pub measurements: usize,
    /// Lag window for the slope fit, as fractions of `t_max`.
    pub fit_window: [f64; 2],
    pub table_cells: usize,
    pub bootstrap_resamples: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            kernel: "gg3".to_string(),
            n_sites: 256,
            temperature: 1.0,
            t_max: 200.0,
            n_replicas: 64,
            seed: 1,
            measurements: 200,
            fit_window: [0.05, 0.25],
            table_cells: DEFAULT_CELLS,
            bootstrap_resamples: 400,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_sites < 3 {
            return bad(format!("ring needs at least 3 sites, got {}", self.n_sites));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.n_replicas == 0 {
            return bad("at least one replica is required".into());
        }
        if self.measurements < 2 {
            return bad(format!("at least 2 measurement intervals are required, got {}", self.measurements));
        }
        let [lo, hi] = self.fit_window;
        if !(0.0 < lo && lo < hi && hi <= 1.0) {
            return bad(format!("fit window must satisfy 0 < lo < hi ≤ 1, got [{lo}, {hi}]"));
        }
        Ok(())
    }

    pub fn measurement_times(&self) -> Vec<f64> {
        let dt = self.t_max / self.measurements as f64;
        (0..=self.measurements).map(|k| k as f64 * dt).collect()
    }
}

/// One exchange: bond, time and the energy `η` moved from site `b` to `b+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub bond: u32,
    pub time: f64,
    pub eta: f64,
}

/// Observables recorded at a measurement time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// Net energy transferred across all bonds, left to right.
    pub q_tot: f64,
    /// `∫₀ᵗ Σ_b j_b ds`
    pub current_integral: f64,
    /// `∫₀ᵗ Σ_b h_b ds`
    pub h_integral: f64,
    pub total_energy: f64,
    pub events: u64,
}

/// Energies on a ring with per-bond rates, currents and second moments.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub energies: Vec<f64>,
    pub time: f64,
    pub events: u64,
    rates: SumTree,
    currents: SumTree,
    seconds: SumTree,
    transferred: Vec<NeumaierSum>,
    q_total: NeumaierSum,
    current_integral: NeumaierSum,
    h_integral: NeumaierSum,
}

fn bond_observables<S: ExchangeSampler + ?Sized>(sampler: &S, ea: f64, eb: f64) -> (f64, f64, f64) {
    let s = ea + eb;
    let alpha = ea / s;
    let rs = s.sqrt();
    (
        rs * sampler.nu_bar(alpha),
        s * rs * sampler.j_bar(alpha),
        s * s * rs * sampler.h_bar(alpha),
    )
}

impl ChainState {
    pub fn from_energies<S: ExchangeSampler + ?Sized>(energies: Vec<f64>, sampler: &S) -> Result<Self, SimError> {
        let n = energies.len();
        if n < 3 {
            return Err(SimError::InvalidConfig(format!("ring needs at least 3 sites, got {n}")));
        }
        if let Some(e) = energies.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(SimError::InvalidConfig(format!("energies must be positive and finite, got {e}")));
        }
        let obs: Vec<(f64, f64, f64)> = (0..n)
            .map(|b| bond_observables(sampler, energies[b], energies[(b + 1) % n]))
            .collect();
        Ok(Self {
            rates: SumTree::new(&obs.iter().map(|o| o.0).collect::<Vec<_>>()),
            currents: SumTree::new(&obs.iter().map(|o| o.1).collect::<Vec<_>>()),
            seconds: SumTree::new(&obs.iter().map(|o| o.2).collect::<Vec<_>>()),
            energies,
            time: 0.0,
            events: 0,
            transferred: vec![NeumaierSum::new(); n],
            q_total: NeumaierSum::new(),
            current_integral: NeumaierSum::new(),
            h_integral: NeumaierSum::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn bond_rate(&self, b: usize) -> f64 {
        self.rates.get(b)
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.total()
    }

    /// Net energy moved across bond `b` so far.
    pub fn transferred(&self, b: usize) -> f64 {
        self.transferred[b].value()
    }

    pub fn total_energy(&self) -> f64 {
        let mut s = NeumaierSum::new();
        for &e in &self.energies {
            s.add(e);
        }
        s.value()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.time,
            q_tot: self.q_total.value(),
            current_integral: self.current_integral.value(),
            h_integral: self.h_integral.value(),
            total_energy: self.total_energy(),
            events: self.events,
        }
    }

    fn advance_clock(&mut self, dt: f64) {
        self.current_integral.add(self.currents.total() * dt);
        self.h_integral.add(self.seconds.total() * dt);
        self.time += dt;
    }

    fn refresh_bond<S: ExchangeSampler + ?Sized>(&mut self, sampler: &S, b: usize) {
        let n = self.len();
        let (r, j, h) = bond_observables(sampler, self.energies[b], self.energies[(b + 1) % n]);
        self.rates.set(b, r);
        self.currents.set(b, j);
        self.seconds.set(b, h);
    }

    fn exchange<S: ExchangeSampler + ?Sized>(&mut self, sampler: &S, b: usize, rng: &mut ChaCha8Rng) -> EventRecord {
        let n = self.len();
        let c = (b + 1) % n;
        let (ea, eb) = (self.energies[b], self.energies[c]);
        let s = ea + eb;
        let beta = sampler.sample_beta(ea / s, rng);
        let new_a = s * beta;
        let eta = ea - new_a;
        self.energies[b] = new_a;
        self.energies[c] = s - new_a;
        assert!(
            self.energies[b] > 0.0 && self.energies[c] > 0.0,
            "non-positive energy after exchange on bond {b}"
        );
        self.transferred[b].add(eta);
        self.q_total.add(eta);
        self.events += 1;
        for bond in [(b + n - 1) % n, b, c] {
            self.refresh_bond(sampler, bond);
        }
        EventRecord {
            bond: b as u32,
            time: self.time,
            eta,
        }
    }

    /// One event: an `Exp(R)` waiting time, then an exchange on a bond chosen
    /// with probability proportional to its rate.
    pub fn step<S: ExchangeSampler + ?Sized>(&mut self, sampler: &S, rng: &mut ChaCha8Rng) -> EventRecord {
        let r = self.total_rate();
        assert!(r > 0.0, "total rate vanished with positive energies");
        let dt = -(1.0 - rng.gen::<f64>()).ln() / r;
        self.advance_clock(dt);
        let b = self.rates.find(rng.gen::<f64>() * r);
        self.exchange(sampler, b, rng)
    }

    /// Runs until `t_end`. A waiting time that would overshoot is discarded,
    /// which is exact because waiting times are memoryless.
    pub fn run_until<S, F>(&mut self, sampler: &S, t_end: f64, rng: &mut ChaCha8Rng, mut on_event: F)
    where
        S: ExchangeSampler + ?Sized,
        F: FnMut(&EventRecord),
    {
        loop {
            let r = self.total_rate();
            assert!(r > 0.0, "total rate vanished with positive energies");
            let dt = -(1.0 - rng.gen::<f64>()).ln() / r;
            if self.time + dt > t_end {
                self.advance_clock(t_end - self.time);
                self.time = t_end;
                return;
            }
            self.advance_clock(dt);
            let b = self.rates.find(rng.gen::<f64>() * r);
            let rec = self.exchange(sampler, b, rng);
            on_event(&rec);
        }
    }

    /// Largest relative mismatch between stored bond rates and a recomputation.
    pub fn rate_consistency<S: ExchangeSampler + ?Sized>(&self, sampler: &S) -> f64 {
        let n = self.len();
        (0..n)
            .map(|b| {
                let (r, _, _) = bond_observables(sampler, self.energies[b], self.energies[(b + 1) % n]);
                (self.rates.get(b) - r).abs() / r
            })
            .fold(0.0, f64::max)
    }
}

/// I.i.d. `Gamma(d/2, T)` energies on `n_sites` sites.
pub fn init_equilibrium<S: ExchangeSampler + ?Sized>(
    cfg: &SimConfig,
    sampler: &S,
    rng: &mut ChaCha8Rng,
) -> Result<ChainState, SimError> {
    cfg.validate()?;
    let hd = sampler.half_d();
    let energies = (0..cfg.n_sites)
        .map(|_| {
            // a zero draw has probability ~1e-300; redraw rather than fail
            loop {
                let e = sample_gamma(hd, cfg.temperature, rng)?;
                if e > 0.0 {
                    return Ok(e);
                }
            }
        })
        .collect::<Result<Vec<f64>, crate::numerics::NumericsError>>()?;
    ChainState::from_energies(energies, sampler)
}
