//! Finite trial spaces of cylinder functions.

use serde::{Deserialize, Serialize};

use crate::numerics::special::log_gamma;

use super::VariationalError;

/// `coef · Π_i ε_i^{exponents[i]}` over a window of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFunction {
    pub label: String,
    pub terms: Vec<Monomial>,
}

impl BasisFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.exponents
                        .iter()
                        .zip(x)
                        .map(|(&e, &v)| if e == 0.0 { 1.0 } else { v.powf(e) })
                        .product::<f64>()
            })
            .sum()
    }
}

/// Functions `f(ε_0, …, ε_{w−1})` whose shifted sums `Σ_f` span the trial space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpace {
    pub window: usize,
    pub degree: u32,
    pub half_power: bool,
    pub d: u32,
    pub basis: Vec<BasisFunction>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exponent vectors of total degree `deg` over `w` sites.
fn compositions(w: usize, deg: u32) -> Vec<Vec<u32>> {
    if w == 1 {
        return vec![vec![deg]];
    }
    (0..=deg)
        .rev()
        .flat_map(|p| {
            compositions(w - 1, deg - p).into_iter().map(move |mut rest| {
                rest.insert(0, p);
                rest
            })
        })
        .collect()
}

/// `E[Σ coef Π ε_i^e]` over independent `Gamma(h, 1)` sites.
fn gamma_mean(terms: &[Monomial], h: f64) -> Result<f64, VariationalError> {
    let lg_h = log_gamma(h)?;
    let mut acc = 0.0;
    for t in terms {
        let mut lg = 0.0;
        for &e in &t.exponents {
            lg += log_gamma(h + e)? - lg_h;
        }
        acc += t.coef * lg.exp();
    }
    Ok(acc)
}

impl TrialSpace {
    /// Centered monomials `Π (ε_i − d/2)^{p_i}` of total degree `2..=degree`,
    /// shifted to mean zero under the product gamma measure, plus, optionally, `ε_0^{3/2} − Γ(d/2 + 3/2)/Γ(d/2)`.
    ///
    /// Only monomials with `p_0 ≥ 1` are kept: the others are shifts of one
    /// that is, and generate the same `Σ_f`. Degree one is skipped because
    /// `Σ_f` is then the conserved total energy, whose gradient vanishes.
    pub fn polynomial(window: usize, degree: u32, half_power: bool, d: u32) -> Result<Self, VariationalError> {
        if window == 0 {
            return Err(VariationalError::InvalidSpace("window must be ≥ 1".into()));
        }
        if d == 0 {
            return Err(VariationalError::InvalidSpace("dimension must be ≥ 1".into()));
        }
        let mean = d as f64 / 2.0;
        let mut basis = Vec::new();
        for deg in 2..=degree {
            for p in compositions(window, deg) {
                if p[0] == 0 {
                    continue;
                }
                let label = p
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| if e == 1 { format!("(e{i}-m)") } else { format!("(e{i}-m)^{e}") })
                    .collect::<Vec<_>>()
                    .join("");
                let mut terms = expand_centered(&p, mean);
                let offset = gamma_mean(&terms, mean)?;
                terms.push(Monomial {
                    coef: -offset,
                    exponents: vec![0.0; window],
                });
                basis.push(BasisFunction { label, terms });
            }
        }
        if half_power {
            let h = d as f64 / 2.0;
            let mean_32 = (log_gamma(h + 1.5)? - log_gamma(h)?).exp();
            let mut e = vec![0.0; window];
            e[0] = 1.5;
            basis.push(BasisFunction {
                label: "e0^1.5-c".into(),
                terms: vec![
                    Monomial { coef: 1.0, exponents: e },
                    Monomial {
                        coef: -mean_32,
                        exponents: vec![0.0; window],
                    },
                ],
            });
        }
        Ok(Self {
            window,
            degree,
            half_power,
            d,
            basis,
        })
    }

    /// The space spanned by nothing, whose bound is `κ_s` itself.
    pub fn empty(d: u32) -> Self {
        Self {
            window: 1,
            degree: 0,
            half_power: false,
            d,
            basis: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn label(&self) -> String {
        format!("w={} D={}{}", self.window, self.degree, if self.half_power { " +3/2" } else { "" })
    }

    /// `∇_{0,1,η} Σ_{φ_m}` for every basis function.
    ///
    /// `before` and `after` hold sites `−w+1 ..= w`, with sites 0 and 1 at
    /// indices `w−1` and `w`. Exactly the shifts `τ_s φ`, `s ∈ {−w+1, …, 1}`,
    /// that touch site 0 or 1 contribute.
    pub fn gradients(&self, before: &[f64], after: &[f64], out: &mut [f64]) {
        let w = self.window;
        debug_assert_eq!(before.len(), 2 * w);
        for (g, f) in out.iter_mut().zip(&self.basis) {
            *g = (0..=w)
                .map(|start| f.eval(&after[start..start + w]) - f.eval(&before[start..start + w]))
                .sum();
        }
    }
}

fn expand_centered(p: &[u32], mean: f64) -> Vec<Monomial> {
    let mut terms = vec![Monomial {
        coef: 1.0,
        exponents: vec![0.0; p.len()],
    }];
    for (i, &pi) in p.iter().enumerate() {
        let mut next = Vec::new();
        for t in &terms {
            for k in 0..=pi {
                let mut e = t.exponents.clone();
                e[i] = k as f64;
                next.push(Monomial {
                    coef: t.coef * binomial(pi, k) * (-mean).powi((pi - k) as i32),
                    exponents: e,
                });
            }
        }
        terms = next;
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_gamma, RngStream};

    #[test]
    fn window_two_degree_three() {
        let s = TrialSpace::polynomial(2, 3, true, 3).unwrap();
        let labels: Vec<&str> = s.basis.iter().map(|b| b.label.as_str()).collect();
        assert_eq!(
            labels,
            ["(e0-m)^2", "(e0-m)(e1-m)", "(e0-m)^3", "(e0-m)^2(e1-m)", "(e0-m)(e1-m)^2", "e0^1.5-c"]
        );
        assert_eq!(s.label(), "w=2 D=3 +3/2");
    }

    #[test]
    fn expansion_matches_direct_evaluation() {
        let s = TrialSpace::polynomial(2, 3, false, 3).unwrap();
        let x: [f64; 2] = [0.7, 2.3];
        let m: f64 = 1.5;
        // Central moments of Gamma(3/2, 1): variance 3/2, third moment 3.
        let direct = [
            (x[0] - m).powi(2) - 1.5,
            (x[0] - m) * (x[1] - m),
            (x[0] - m).powi(3) - 3.0,
            (x[0] - m).powi(2) * (x[1] - m),
            (x[0] - m) * (x[1] - m).powi(2),
        ];
        for (f, v) in s.basis.iter().zip(direct) {
            assert!((f.eval(&x) - v).abs() < 1e-12, "{}", f.label);
        }
    }

    #[test]
    fn basis_is_centered() {
        let s = TrialSpace::polynomial(2, 3, true, 2).unwrap();
        let mut rng = RngStream::new(11, 0).rng();
        let n = 200_000;
        let mut sums = vec![0.0; s.len()];
        let mut sq = vec![0.0; s.len()];
        for _ in 0..n {
            let x = [sample_gamma(1.0, 1.0, &mut rng).unwrap(), sample_gamma(1.0, 1.0, &mut rng).unwrap()];
            for (m, f) in s.basis.iter().enumerate() {
                let v = f.eval(&x);
                sums[m] += v;
                sq[m] += v * v;
            }
        }
        for m in 0..s.len() {
            let mean = sums[m] / n as f64;
            let se = ((sq[m] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!(mean.abs() < 5.0 * se, "{}: {mean} ± {se}", s.basis[m].label);
        }
    }

    #[test]
    fn conserved_quantity_has_zero_gradient() {
        let s = TrialSpace {
            basis: vec![BasisFunction {
                label: "e0".into(),
                terms: vec![Monomial {
                    coef: 1.0,
                    exponents: vec![1.0, 0.0],
                }],
            }],
            ..TrialSpace::polynomial(2, 0, false, 2).unwrap()
        };
        let before = [0.3, 1.0, 2.0, 0.4];
        let after = [0.3, 0.25, 2.75, 0.4];
        let mut g = [f64::NAN];
        s.gradients(&before, &after, &mut g);
        assert!(g[0].abs() < 1e-15);
    }

    #[test]
    fn gradient_sums_all_touching_shifts() {
        // f = ε0 ε1 on w = 2: Σ_f changes through ε_{-1}ε_0, ε_0ε_1, ε_1ε_2
        let s = TrialSpace {
            basis: vec![BasisFunction {
                label: "e0e1".into(),
                terms: vec![Monomial {
                    coef: 1.0,
                    exponents: vec![1.0, 1.0],
                }],
            }],
            ..TrialSpace::polynomial(2, 0, false, 2).unwrap()
        };
        let before = [0.3, 1.0, 2.0, 0.4];
        let after = [0.3, 0.25, 2.75, 0.4];
        let mut g = [0.0];
        s.gradients(&before, &after, &mut g);
        let expected = 0.3 * (0.25 - 1.0) + (0.25 * 2.75 - 2.0) + 0.4 * (2.75 - 2.0);
        assert!((g[0] - expected).abs() < 1e-14);
    }
}
