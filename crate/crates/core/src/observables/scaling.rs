//! Equilibrium pair averages at temperature `T` and the scaling constants
//! that must come out independent of `T`.

use serde::{Deserialize, Serialize};

use crate::kernels::Kernel;
use crate::numerics::{integrate_2d_unit_square, QuadResult, QuadratureSpec, SingularLocus};

use super::{ObservablesError, ReducedProfile};

/// Beyond this total energy (in units of `T`) the gamma weight is below 1e-60.
const S_CUTOFF: f64 = 150.0;

/// `⟨f(ε_0, ε_1)⟩_T` over the product of two `Gamma(d/2, T)` laws.
///
/// Integrates over `(α, u)` with `ε_0 = Tsα`, `ε_1 = Ts(1−α)` and `s = −ln u`,
/// so the exponential factor of the weight is absorbed by `du`.
pub(crate) fn pair_average<F>(
    half_d: f64,
    temperature: f64,
    f: F,
    spec: &QuadratureSpec,
) -> Result<QuadResult, ObservablesError>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let norm = 1.0 / crate::numerics::special::gamma(half_d).powi(2);
    Ok(integrate_2d_unit_square(
        |alpha, u| {
            let s = -u.ln();
            if !(s > 0.0) || s > S_CUTOFF || alpha <= 0.0 || alpha >= 1.0 {
                return 0.0;
            }
            let w = s.powf(2.0 * half_d - 1.0) * (alpha * (1.0 - alpha)).powf(half_d - 1.0);
            let ts = temperature * s;
            norm * w * f(ts * alpha, ts * (1.0 - alpha))
        },
        &[SingularLocus::AlphaMid],
        spec,
    )?)
}

/// Pair averages at one temperature together with their scaled forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureAverages {
    pub temperature: f64,
    /// `⟨ν⟩_T`
    pub mean_nu: QuadResult,
    /// `½⟨(ε_0−ε_1) j⟩_T`
    pub half_current_moment: QuadResult,
    /// `½⟨h⟩_T`
    pub half_mean_h: QuadResult,
    /// `⟨ν⟩_T / √T`
    pub nu_scaled: f64,
    /// `½⟨(ε_0−ε_1) j⟩_T / T^{5/2}`
    pub current_moment_scaled: f64,
    /// `½⟨h⟩_T / T^{5/2}`
    pub h_scaled: f64,
    /// `κ_s(T) = ½⟨h⟩_T / T²`
    pub kappa_s: f64,
    /// `κ_s(T) / √T`
    pub kappa_s_scaled: f64,
}

/// Averages at `temperature` computed directly, without using the scaling law.
pub fn temperature_averages(
    k: &Kernel,
    profile: &ReducedProfile,
    temperature: f64,
    spec: &QuadratureSpec,
) -> Result<TemperatureAverages, ObservablesError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(crate::numerics::NumericsError::Domain {
            what: "temperature",
            value: temperature,
        }
        .into());
    }
    let hd = k.half_d();
    let pow = |e0: f64, e1: f64, p: f64, g: &dyn Fn(f64) -> f64| {
        let s = e0 + e1;
        s.powf(p) * g(e0 / s)
    };
    let mean_nu = pair_average(hd, temperature, |a, b| pow(a, b, 0.5, &|x| profile.nu_bar(x)), spec)?;
    let half_current_moment = pair_average(
        hd,
        temperature,
        |a, b| 0.5 * (a - b) * pow(a, b, 1.5, &|x| profile.j_bar(x)),
        spec,
    )?;
    let half_mean_h = pair_average(hd, temperature, |a, b| 0.5 * pow(a, b, 2.5, &|x| profile.h_bar(x)), spec)?;
    let rt = temperature.sqrt();
    let t52 = temperature * temperature * rt;
    let kappa_s = half_mean_h.value / (temperature * temperature);
    Ok(TemperatureAverages {
        temperature,
        mean_nu,
        half_current_moment,
        half_mean_h,
        nu_scaled: mean_nu.value / rt,
        current_moment_scaled: half_current_moment.value / t52,
        h_scaled: half_mean_h.value / t52,
        kappa_s,
        kappa_s_scaled: kappa_s / rt,
    })
}
