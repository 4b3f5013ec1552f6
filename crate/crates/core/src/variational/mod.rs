//! Upper bounds on the conductivity from its variational formula over
//! finite trial spaces of cylinder functions.

pub mod basis;
pub mod program;

pub use basis::{BasisFunction, Monomial, TrialSpace};
pub use program::{
    assemble, assemble_direct, assemble_exact, assemble_for_kernel, kappa_upper_curve, minimize, BatchMoments, CurvePoint,
    QuadraticProgram, VariationalBound, DEFAULT_BATCHES, RIDGE_SCALE,
};

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::observables::ObservablesError;
use crate::simulator::SimError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error("invalid trial space: {0}")]
    InvalidSpace(String),
    #[error("S is indefinite (smallest eigenvalue {min_eigenvalue:e} below −{tolerance:e}); increase n_samples")]
    Indefinite { min_eigenvalue: f64, tolerance: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Observables(#[from] ObservablesError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}
