//! Event-driven simulation of the chain on a ring and Green–Kubo estimation
//! of the conductivity from transferred-energy fluctuations.

pub mod chain;
pub mod checks;
pub mod eventlog;
pub mod green_kubo;
pub mod sumtree;
pub mod table;

pub use chain::{init_equilibrium, ChainState, EventRecord, SimConfig, Snapshot};
pub use checks::{equilibrium_invariance_test, scaling_check, InvarianceReport, ScalingRow, ScalingTable};
pub use eventlog::{read_event_log, EventLogWriter, EVENT_RECORD_BYTES};
pub use green_kubo::{
    estimate_from_trajectories, run_green_kubo, run_replica, write_trajectories_jsonl, GreenKuboEstimate, GreenKuboRun, LagPoint,
    ReplicaTrajectory,
};
pub use sumtree::SumTree;
pub use table::{
    sample_exchange, ExchangeSampler, ExchangeTable, InversionSampler, SkewedSampler, TableDiagnostics,
    TableRegistry, BETA_CLAMP, DEFAULT_CELLS,
};

use thiserror::Error;

use crate::kernels::KernelError;
use crate::numerics::NumericsError;
use crate::observables::ObservablesError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("no exchange table for kernel '{0}'; call TableRegistry::precompute first")]
    TableMissing(String),
    #[error("kernel '{0}' fails the symmetry or detailed-balance checks and cannot be simulated")]
    InvalidKernel(String),
    #[error(
        "ring too small: diffusive spread {spread:.1} exceeds N/4 = {limit:.1} by t_max; increase n_sites to at least {suggested}"
    )]
    WrapAround {
        spread: f64,
        limit: f64,
        suggested: usize,
    },
    #[error("i/o failure: {0}")]
    Io(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Observables(#[from] ObservablesError),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

/// Thermal diffusivity `D = (T²/χ_T) κ = 2κ/d`, with `χ_T = dT²/2`.
pub fn diffusivity(kappa: f64, temperature: f64, d: u32) -> Result<f64, SimError> {
    if !(temperature > 0.0) {
        return Err(SimError::InvalidConfig(format!("temperature must be positive, got {temperature}")));
    }
    if d == 0 {
        return Err(SimError::InvalidConfig("dimension must be positive".into()));
    }
    Ok(2.0 * kappa / d as f64)
}
