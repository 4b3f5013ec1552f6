//! Stochastic energy-exchange chains.
//!
//! Neighbouring sites of a one-dimensional chain exchange energy at rates given
//! by a kernel `W(ε_a, ε_b | ε_a − η, ε_b + η)`. The crate provides
//!
//! * [`numerics`]: special functions, singular-aware adaptive quadrature and
//!   seeded random streams;
//! * [`kernels`]: the kernel abstraction, built-in kernels and checks of the
//!   homogeneity, symmetry and detailed-balance conditions;
//! * [`observables`]: pair rates and currents and the static conductivity
//!   constants;
//! * [`variational`]: upper bounds on the conductivity from the variational
//!   formula over finite trial spaces;
//! * [`simulator`]: event-driven simulation of the chain on a ring with
//!   Green–Kubo estimation of the conductivity.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod kernels;
pub mod numerics;
pub mod observables;
pub mod simulator;
pub mod variational;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
