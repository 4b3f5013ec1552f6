//! Tabulated reduced moments `ν̄`, `J̄`, `H̄` and the averaged current `j̃`.
//!
//! Equilibrium averages of products of pair observables need these
//! functions at many points; both are tabulated once as piecewise Chebyshev
//! interpolants on panels graded toward the points where they are not smooth
//! (the edges of the simplex and its centre, where the singular curves meet).

use crate::kernels::Kernel;
use crate::numerics::interp::graded_breaks;
use crate::numerics::{integrate_semi_infinite, PiecewiseChebyshev, QuadratureSpec};

use super::pair::reduced_moment;
use super::ObservablesError;

const ORDER: usize = 16;
const LEVELS: u32 = 52;
/// Upper end of the tabulated range of `j̃`.
const TILDE_MAX: f64 = 256.0;

/// Interpolants of `ν̄(α)`, `J̄(α)`, `H̄(α)` on `[0, 1]`.
///
/// Each moment is held as two tables on `[0, ½]`, one in `α` and one in
/// `1−α`, so that points next to either edge are sampled with their small
/// coordinate exact.
#[derive(Debug, Clone)]
pub struct ReducedProfile {
    tables: [[PiecewiseChebyshev; 2]; 3],
    /// Largest quadrature error estimate among the tabulated values.
    pub max_node_error: f64,
    pub converged: bool,
}

impl ReducedProfile {
    pub fn build(k: &Kernel, spec: &QuadratureSpec) -> Result<Self, ObservablesError> {
        let breaks = graded_breaks(&[0.0, 0.5], LEVELS);
        let stats = std::sync::Mutex::new((0.0f64, true));
        let table = |power: u8, upper: bool| {
            PiecewiseChebyshev::build(breaks.clone(), ORDER, |x| {
                let (a, ac) = if upper { (1.0 - x, x) } else { (x, 1.0 - x) };
                let r = reduced_moment(k, a, ac, power, spec)?;
                let mut g = stats.lock().unwrap();
                g.0 = g.0.max(r.error);
                g.1 &= r.converged;
                Ok::<_, ObservablesError>(r.value)
            })
        };
        let build = |power: u8| -> Result<[PiecewiseChebyshev; 2], ObservablesError> {
            Ok([table(power, false)?, table(power, true)?])
        };
        let tables = [build(0)?, build(1)?, build(2)?];
        let (max_node_error, converged) = stats.into_inner().unwrap();
        Ok(Self {
            tables,
            max_node_error,
            converged,
        })
    }

    fn eval(&self, moment: usize, alpha: f64) -> f64 {
        let t = &self.tables[moment];
        if alpha <= 0.5 {
            t[0].eval(alpha)
        } else {
            t[1].eval(1.0 - alpha)
        }
    }

    pub fn nu_bar(&self, alpha: f64) -> f64 {
        self.eval(0, alpha)
    }

    pub fn j_bar(&self, alpha: f64) -> f64 {
        self.eval(1, alpha)
    }

    pub fn h_bar(&self, alpha: f64) -> f64 {
        self.eval(2, alpha)
    }

    /// Current `j(ε_a, ε_b)` from the tabulated `J̄`.
    pub fn current(&self, ea: f64, eb: f64) -> f64 {
        let s = ea + eb;
        s * s.sqrt() * self.j_bar(ea / s)
    }
}

/// `j̃(ε)` tabulated on `[0, 256]`, with direct quadrature beyond.
#[derive(Debug, Clone)]
pub struct TildeCurrent {
    table: PiecewiseChebyshev,
    profile: ReducedProfile,
    half_d: f64,
    spec: QuadratureSpec,
    pub max_node_error: f64,
    pub converged: bool,
}

impl TildeCurrent {
    pub fn build(k: &Kernel, profile: &ReducedProfile, spec: &QuadratureSpec) -> Result<Self, ObservablesError> {
        let mut breaks = graded_breaks(&[0.0, 1.0], LEVELS);
        let mut top = 2.0;
        while top <= TILDE_MAX {
            breaks.push(top);
            top *= 2.0;
        }
        let half_d = k.half_d();
        let stats = std::sync::Mutex::new((0.0f64, true));
        let table = PiecewiseChebyshev::build(breaks, ORDER, |eps| {
            let (v, err, ok) = direct(profile, half_d, eps, spec)?;
            let mut g = stats.lock().unwrap();
            g.0 = g.0.max(err);
            g.1 &= ok;
            Ok::<_, ObservablesError>(v)
        })?;
        let (max_node_error, converged) = stats.into_inner().unwrap();
        Ok(Self {
            table,
            profile: profile.clone(),
            half_d,
            spec: *spec,
            max_node_error,
            converged,
        })
    }

    pub fn eval(&self, eps: f64) -> f64 {
        if eps <= TILDE_MAX {
            self.table.eval(eps)
        } else {
            direct(&self.profile, self.half_d, eps, &self.spec)
                .map(|r| r.0)
                .unwrap_or(f64::NAN)
        }
    }
}

fn direct(
    profile: &ReducedProfile,
    half_d: f64,
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64, bool), ObservablesError> {
    if eps <= 0.0 {
        // j(0, x) = x^{3/2} J̄(0)
        let v = profile.j_bar(0.0) * crate::numerics::special::gamma(half_d + 1.5)
            / crate::numerics::special::gamma(half_d);
        return Ok((v, 0.0, true));
    }
    let norm = 1.0 / crate::numerics::special::gamma(half_d);
    let r = integrate_semi_infinite(
        |x| {
            if x <= 0.0 {
                return 0.0;
            }
            profile.current(eps, x) * x.powf(half_d - 1.0) * (-x).exp()
        },
        1.0,
        &[eps],
        spec,
    )?;
    Ok((norm * r.value, norm * r.error, r.converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_kernel;
    use crate::observables::pair;
    use rand::{Rng, SeedableRng};

    #[test]
    fn profile_matches_direct_quadrature() {
        let spec = QuadratureSpec::with_tolerance(1e-13, 1e-13);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for name in ["gg2", "gg3", "root-eta", "uniform"] {
            let k = make_kernel(name).unwrap();
            let p = ReducedProfile::build(&k, &spec).unwrap();
            for _ in 0..50 {
                let a: f64 = rng.gen_range(1e-4..1.0 - 1e-4);
                let n = pair::nu_bar(&k, a, &spec).unwrap().value;
                let jj = pair::j_bar(&k, a, &spec).unwrap().value;
                let hh = pair::h_bar(&k, a, &spec).unwrap().value;
                assert!((p.nu_bar(a) - n).abs() < 1e-10, "{name} nu a={a}");
                assert!((p.j_bar(a) - jj).abs() < 1e-10, "{name} j a={a}");
                assert!((p.h_bar(a) - hh).abs() < 1e-10, "{name} h a={a}");
            }
        }
    }

    #[test]
    fn tilde_table_root_eta() {
        let spec = QuadratureSpec::with_tolerance(1e-12, 1e-12);
        let k = make_kernel("root-eta").unwrap();
        let p = ReducedProfile::build(&k, &spec).unwrap();
        let t = TildeCurrent::build(&k, &p, &spec).unwrap();
        for eps in [1e-6, 0.01, 0.3, 1.0, 2.5, 10.0, 40.0, 300.0] {
            let exact = 2.0 / 3.0 * f64::powf(eps, 1.5) - std::f64::consts::PI.sqrt() / 2.0;
            assert!((t.eval(eps) - exact).abs() < 1e-9 * exact.abs().max(1.0), "eps={eps}: {}", t.eval(eps));
        }
    }
}
