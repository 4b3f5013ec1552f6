//! Special functions, adaptive quadrature, interpolation, statistics and
//! reproducible random streams shared by the rest of the crate.

pub mod interp;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;

pub use interp::PiecewiseChebyshev;
pub use quadrature::{
    integrate_1d, integrate_1d_graded, integrate_1d_with_breaks, integrate_2d_unit_square,
    integrate_semi_infinite,
    QuadResult, QuadratureSpec, SingularLocus,
};
pub use rng::{sample_gamma, RngStream};
pub use special::{elliptic_k, elliptic_k_from_complementary, gamma_cdf, log_gamma};

use thiserror::Error;

/// Failures of the numerical primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("{what} (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error("integrand returned NaN at {}", fmt_point(*.x, *.y))]
    NonFinite { x: f64, y: Option<f64> },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

fn fmt_point(x: f64, y: Option<f64>) -> String {
    match y {
        Some(y) => format!("(alpha={x}, beta={y})"),
        None => format!("x={x}"),
    }
}
