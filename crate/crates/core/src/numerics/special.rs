//! Special functions: complete elliptic integral of the first kind and the
//! log-gamma function.
//!
//! The elliptic integral takes the *modulus* `k`:
//!
//! ```text
//! K(k) = ∫₀^{π/2} dθ / √(1 − k² sin²θ)
//! ```
//!
//! Libraries that use the *parameter* convention evaluate `K(m)` with
//! `m = k²`; passing a parameter here silently gives the wrong value, so the
//! two entry points are named after what they accept.

use std::f64::consts::FRAC_PI_2;

use super::NumericsError;

const AGM_MAX_ITER: usize = 64;

/// Complete elliptic integral of the first kind as a function of the modulus
/// `k ∈ [0, 1)`, evaluated with the arithmetic–geometric mean.
pub fn elliptic_k(modulus: f64) -> Result<f64, NumericsError> {
    if !(0.0..1.0).contains(&modulus) {
        return Err(NumericsError::Domain {
            what: "elliptic_k modulus must lie in [0, 1)",
            value: modulus,
        });
    }
    // k' = √(1−k²) computed as √((1−k)(1+k)) to keep precision near k → 1.
    let complementary = ((1.0 - modulus) * (1.0 + modulus)).sqrt();
    Ok(elliptic_k_from_complementary(complementary))
}

/// `K` expressed through the complementary modulus `k' = √(1−k²)`.
///
/// Kernels whose argument is a ratio `m/M` can form `k' = √((M−m)/M)`
/// directly, which avoids cancellation next to the logarithmic singularity.
/// Returns `+∞` for `k' = 0`.
pub fn elliptic_k_from_complementary(complementary: f64) -> f64 {
    if complementary <= 0.0 {
        return f64::INFINITY;
    }
    FRAC_PI_2 / agm(1.0, complementary)
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_ITER {
        let mean = 0.5 * (a + b);
        if (a - b).abs() <= 4.0 * f64::EPSILON * mean {
            return mean;
        }
        let geo = (a * b).sqrt();
        a = mean;
        b = geo;
    }
    0.5 * (a + b)
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, NumericsError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(NumericsError::Domain {
            what: "log_gamma argument must be positive and finite",
            value: x,
        });
    }
    Ok(libm::lgamma(x))
}

/// `Γ(x)` for moderate positive `x`.
pub(crate) fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Regularized lower incomplete gamma `P(shape, x/scale)`, i.e. the CDF of a
/// Gamma(shape, scale) variable.
pub fn gamma_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(shape, x / scale)
}
