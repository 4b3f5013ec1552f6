//! Seeded, stream-split random number generation.
//!
//! A stream is a ChaCha8 generator keyed by `seed` with its stream counter set
//! to `stream_id`, so distinct ids give non-overlapping sequences of the same
//! keyed cipher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Identifier of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream for sub-task `index`, derived without consuming draws.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: splitmix(self.seed ^ splitmix(self.stream_id.wrapping_add(0x5bd1_e995))),
            stream_id: index,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One draw from Gamma(shape, scale), density
/// `x^{shape−1} e^{−x/scale} / (scale^shape Γ(shape))`.
pub fn sample_gamma<R: rand::Rng + ?Sized>(
    shape: f64,
    scale: f64,
    rng: &mut R,
) -> Result<f64, NumericsError> {
    let dist = gamma_dist(shape, scale)?;
    Ok(dist.sample(rng))
}

/// Reusable Gamma distribution after parameter validation.
pub fn gamma_dist(shape: f64, scale: f64) -> Result<Gamma<f64>, NumericsError> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(NumericsError::Domain {
            what: "gamma shape must be positive",
            value: shape,
        });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(NumericsError::Domain {
            what: "gamma scale must be positive",
            value: scale,
        });
    }
    Gamma::new(shape, scale).map_err(|_| NumericsError::Domain {
        what: "gamma parameters rejected",
        value: shape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::gamma_cdf;
    use crate::numerics::stats::ks_one_sample;
    use rand::Rng;

    #[test]
    fn same_stream_same_draws() {
        let s = RngStream::new(42, 3);
        let a: Vec<u64> = (0..16).map(|_| s.rng().gen()).collect();
        let mut r1 = s.rng();
        let mut r2 = s.rng();
        let x: Vec<u64> = (0..16).map(|_| r1.gen()).collect();
        let y: Vec<u64> = (0..16).map(|_| r2.gen()).collect();
        assert_eq!(x, y);
        assert!(a.iter().all(|&v| v == a[0]));
    }

    #[test]
    fn distinct_streams_differ() {
        let x: u64 = RngStream::new(42, 0).rng().gen();
        let y: u64 = RngStream::new(42, 1).rng().gen();
        let z: u64 = RngStream::new(43, 0).rng().gen();
        assert_ne!(x, y);
        assert_ne!(x, z);
        assert_ne!(RngStream::new(1, 2).child(0), RngStream::new(1, 2).child(1));
    }

    #[test]
    fn exponential_special_case_mean() {
        let mut rng = RngStream::new(1, 0).rng();
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_gamma(1.0, 1.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn shape_three_halves_scale_two_moments() {
        let mut rng = RngStream::new(2, 0).rng();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_gamma(1.5, 2.0, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // sd of the mean is √(6/n); sd of the variance estimate is √((μ4 − σ⁴)/n)
        assert!((mean - 3.0).abs() < 5.0 * (6.0 / n as f64).sqrt(), "{mean}");
        let mu4 = 3.0 * 6.0f64.powi(2) * (1.0 + 2.0 / 1.5);
        assert!((var - 6.0).abs() < 5.0 * ((mu4 - 36.0) / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn gamma_sampler_ks_distance() {
        let mut rng = RngStream::new(7, 0).rng();
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_gamma(1.5, 1.0, &mut rng).unwrap()).collect();
        let ks = ks_one_sample(&xs, |x| gamma_cdf(1.5, 1.0, x));
        assert!(ks.statistic < 0.002, "{ks:?}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut rng = RngStream::new(0, 0).rng();
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, -1.0, &mut rng).is_err());
    }
}
