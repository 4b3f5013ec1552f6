//! Assembly and minimization of the quadratic form of the variational bound.
//!
//! With `f = Σ_m c_m φ_m`,
//!
//! ```text
//! ½ ⟨∫dη W (η + ∇Σ_f)²⟩ = κ_s + cᵀL + ½ cᵀS c
//! S_mn = ⟨∫dη W ∇Σ_{φ_m} ∇Σ_{φ_n}⟩,  L_m = ⟨∫dη W η ∇Σ_{φ_m}⟩
//! ```
//!
//! so the bound over the span is `κ_var = κ_s − ½ LᵀS⁻¹L`, at `T = 1`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::Kernel;
use crate::numerics::special::log_gamma;
use crate::numerics::{sample_gamma, QuadratureSpec, RngStream};
use crate::observables::simplex::square_integral;
use crate::observables::{gamma_ratio, kappa_s};
use crate::simulator::ExchangeSampler;

use super::basis::TrialSpace;
use super::VariationalError;

/// Ridge added to `S` relative to its mean diagonal entry.
pub const RIDGE_SCALE: f64 = 1e-10;
/// Number of independent batches used for standard errors.
pub const DEFAULT_BATCHES: usize = 100;
/// Stream id of the assembly samples.
const ASSEMBLY_STREAM: u64 = 2;

/// Moments of one assembly batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMoments {
    pub samples: usize,
    pub s: Vec<Vec<f64>>,
    pub l: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProgram {
    pub space_label: String,
    pub s: Vec<Vec<f64>>,
    pub l: Vec<f64>,
    pub kappa_s_ref: f64,
    pub kappa_s_ref_error: f64,
    /// Standard error (Monte Carlo) or error estimate (quadrature) per entry.
    pub s_error: Vec<Vec<f64>>,
    pub l_error: Vec<f64>,
    /// `½⟨ν η²⟩` from the same samples; absent for exact assembly.
    pub kappa_s_mc: Option<f64>,
    pub n_samples: usize,
    pub batches: Vec<BatchMoments>,
    /// Conditions under which the estimate should not be trusted.
    pub warnings: Vec<String>,
}

impl QuadraticProgram {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    /// A program given directly by its entries, with no error estimates.
    pub fn from_parts(s: Vec<Vec<f64>>, l: Vec<f64>, kappa_s_ref: f64) -> Result<Self, VariationalError> {
        let m = l.len();
        if s.len() != m || s.iter().any(|r| r.len() != m) {
            return Err(VariationalError::InvalidSpace(format!("S must be {m}×{m}")));
        }
        Ok(Self {
            space_label: "custom".into(),
            s,
            l,
            kappa_s_ref,
            kappa_s_ref_error: 0.0,
            s_error: vec![vec![0.0; m]; m],
            l_error: vec![0.0; m],
            kappa_s_mc: None,
            n_samples: 0,
            batches: Vec::new(),
            warnings: Vec::new(),
        })
    }
}

/// Pair integrals `∫∫ W̃ D_p D_q` and `∫∫ W̃ (α − β) D_p` over the reduced
/// simplex, with `D_p = β^a (1−β)^b − α^a (1−α)^b` for each distinct pair
/// exponent `p = (a, b)`.
#[derive(Debug, Clone, PartialEq)]
struct PairIntegrals {
    cross: Vec<Vec<f64>>,
    linear: Vec<f64>,
    /// `∫∫ W̃ (α − β)²`.
    quadratic: f64,
}

fn pair_diff((a, b): (f64, f64), alpha: f64, alpha_c: f64, beta: f64, beta_c: f64) -> f64 {
    let pw = |x: f64, e: f64| if e == 0.0 { 1.0 } else { x.powf(e) };
    pw(beta, a) * pw(beta_c, b) - pw(alpha, a) * pw(alpha_c, b)
}

/// Shift expansion of a trial space, shared by both assembly routes.
struct Expansion {
    terms: Vec<Vec<GradTerm>>,
    pairs: Vec<(f64, f64)>,
    h: f64,
}

impl Expansion {
    fn new(space: &TrialSpace, h: f64) -> Self {
        let (terms, pairs) = gradient_terms(space);
        Self { terms, pairs, h }
    }

    fn power(&self, p: usize) -> f64 {
        self.pairs[p].0 + self.pairs[p].1
    }

    /// Maps pair integrals (values, absolute errors) to `(S, L, κ_s)`,
    /// integrating out the pair sum and the other sites by gamma moments.
    #[allow(clippy::type_complexity)]
    fn combine(&self, v: &PairIntegrals, e: &PairIntegrals) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64), VariationalError> {
        let h = self.h;
        let d = 2.0 * h;
        let m = self.terms.len();
        let mut s = vec![vec![0.0; m]; m];
        let mut s_err = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in a..m {
                let (mut val, mut err) = (0.0, 0.0);
                for t in &self.terms[a] {
                    for u in &self.terms[b] {
                        let pref = t.coef
                            * u.coef
                            * others_moment(h, &t.others, &u.others)?
                            * gamma_ratio(d + self.power(t.pair) + self.power(u.pair) + 0.5, h);
                        val += pref * v.cross[t.pair][u.pair];
                        err += (pref * e.cross[t.pair][u.pair]).abs();
                    }
                }
                s[a][b] = val;
                s[b][a] = val;
                s_err[a][b] = err;
                s_err[b][a] = err;
            }
        }
        let mut l = vec![0.0; m];
        let mut l_err = vec![0.0; m];
        for a in 0..m {
            for t in &self.terms[a] {
                let pref = t.coef * others_moment(h, &t.others, &[])? * gamma_ratio(d + self.power(t.pair) + 1.5, h);
                l[a] += pref * v.linear[t.pair];
                l_err[a] += (pref * e.linear[t.pair]).abs();
            }
        }
        let ks = 0.5 * gamma_ratio(d + 2.5, h) * v.quadratic;
        Ok((s, s_err, l, l_err, ks))
    }
}

fn check_dimension(space: &TrialSpace, h: f64) -> Result<(), VariationalError> {
    if (2.0 * h - space.d as f64).abs() > 0.0 {
        return Err(VariationalError::InvalidSpace(format!(
            "trial space built for d = {} but the kernel has d = {}",
            space.d,
            2.0 * h
        )));
    }
    Ok(())
}

/// Monte Carlo assembly at `T = 1`.
///
/// Every entry is an expectation over `2w` gamma sites and one exchange
/// drawn from `sampler`. The pair sum and the sites outside the exchanging
/// pair enter only through gamma moments, so they are integrated exactly and
/// only the pair fraction `α ~ Beta(d/2, d/2)` and the exchange `β` are
/// sampled, with weight `ν̄(α)`. All entries use the same samples.
/// `kappa_s_ref` is the static constant (value, error) of the kernel the
/// sampler represents.
pub fn assemble<S: ExchangeSampler + ?Sized>(
    sampler: &S,
    space: &TrialSpace,
    kappa_s_ref: (f64, f64),
    n_samples: usize,
    seed: u64,
) -> Result<QuadraticProgram, VariationalError> {
    let h = sampler.half_d();
    check_dimension(space, h)?;
    let m = space.len();
    let exp = Expansion::new(space, h);
    let np = exp.pairs.len();
    let beta_norm = (2.0 * log_gamma(h)? - log_gamma(2.0 * h)?).exp();
    let n_batches = DEFAULT_BATCHES.min(n_samples.max(1));
    let per_batch = n_samples / n_batches;
    let extra = n_samples % n_batches;
    let base = RngStream::new(seed, ASSEMBLY_STREAM);

    let batches: Vec<(usize, PairIntegrals)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let count = per_batch + usize::from(b < extra);
            let mut rng = base.child(b as u64).rng();
            let mut acc = PairIntegrals {
                cross: vec![vec![0.0; np]; np],
                linear: vec![0.0; np],
                quadratic: 0.0,
            };
            let mut dv = vec![0.0; np];
            for _ in 0..count {
                let (x, y) = loop {
                    let x = sample_gamma(h, 1.0, &mut rng)?;
                    let y = sample_gamma(h, 1.0, &mut rng)?;
                    if x > 0.0 && y > 0.0 {
                        break (x, y);
                    }
                };
                let alpha = x / (x + y);
                let alpha_c = y / (x + y);
                let nu = sampler.nu_bar(alpha);
                let beta = sampler.sample_beta(alpha, &mut rng);
                let beta_c = 1.0 - beta;
                let diff = alpha - beta;
                for (p, out) in dv.iter_mut().enumerate() {
                    *out = pair_diff(exp.pairs[p], alpha, alpha_c, beta, beta_c);
                }
                acc.quadratic += nu * diff * diff;
                for p in 0..np {
                    let w = nu * dv[p];
                    acc.linear[p] += w * diff;
                    for q in p..np {
                        acc.cross[p][q] += w * dv[q];
                    }
                }
            }
            let scale = beta_norm / count.max(1) as f64;
            acc.quadratic *= scale;
            for p in 0..np {
                acc.linear[p] *= scale;
                for q in p..np {
                    acc.cross[p][q] *= scale;
                    acc.cross[q][p] = acc.cross[p][q];
                }
            }
            Ok((count, acc))
        })
        .collect::<Result<_, VariationalError>>()?;

    let zero = PairIntegrals {
        cross: vec![vec![0.0; np]; np],
        linear: vec![0.0; np],
        quadratic: 0.0,
    };
    let mut moments = Vec::with_capacity(batches.len());
    let mut ks_batches = Vec::with_capacity(batches.len());
    for (count, acc) in &batches {
        let (s, _, l, _, ks) = exp.combine(acc, &zero)?;
        moments.push(BatchMoments { samples: *count, s, l });
        ks_batches.push(ks);
    }
    let total = n_samples.max(1) as f64;
    let mut s = vec![vec![0.0; m]; m];
    let mut l = vec![0.0; m];
    let mut ks_mc = 0.0;
    for (b, ks) in moments.iter().zip(&ks_batches) {
        let wgt = b.samples as f64 / total;
        ks_mc += wgt * ks;
        for i in 0..m {
            l[i] += wgt * b.l[i];
            for j in 0..m {
                s[i][j] += wgt * b.s[i][j];
            }
        }
    }
    let nb = moments.len() as f64;
    let spread = |f: &dyn Fn(&BatchMoments) -> f64, mean: f64| -> f64 {
        if moments.len() < 2 {
            return f64::INFINITY;
        }
        let var = moments.iter().map(|b| (f(b) - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        (var / nb).sqrt()
    };
    let s_error: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| spread(&|b| b.s[i][j], s[i][j])).collect())
        .collect();
    let l_error: Vec<f64> = (0..m).map(|i| spread(&|b| b.l[i], l[i])).collect();

    let mut warnings = Vec::new();
    if moments.len() < 10 {
        warnings.push(format!("only {} batches; standard errors are unreliable", moments.len()));
    }
    if n_samples < 1000 * m.max(1) {
        warnings.push(format!("{n_samples} samples for {m} basis functions is too few for a stable solve"));
    }
    Ok(QuadraticProgram {
        space_label: space.label(),
        s,
        l,
        kappa_s_ref: kappa_s_ref.0,
        kappa_s_ref_error: kappa_s_ref.1,
        s_error,
        l_error,
        kappa_s_mc: Some(ks_mc),
        n_samples,
        batches: moments,
        warnings,
    })
}

/// [`assemble`] for kernel `k` with its static constant from quadrature.
pub fn assemble_for_kernel<S: ExchangeSampler + ?Sized>(
    k: &Kernel,
    sampler: &S,
    space: &TrialSpace,
    n_samples: usize,
    seed: u64,
) -> Result<QuadraticProgram, VariationalError> {
    let ks = kappa_s(k, &QuadratureSpec::default())?;
    assemble(sampler, space, (ks.value, ks.error), n_samples, seed)
}

/// Direct Monte Carlo estimate of `(S, L)`: all `2w` sites and the exchange
/// are sampled and the gradients evaluated site by site. Much noisier than
/// [`assemble`]; kept as an independent check of the shift expansion.
pub fn assemble_direct<S: ExchangeSampler + ?Sized>(
    sampler: &S,
    space: &TrialSpace,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), VariationalError> {
    let h = sampler.half_d();
    check_dimension(space, h)?;
    let (m, w) = (space.len(), space.window);
    let mut rng = RngStream::new(seed, ASSEMBLY_STREAM).rng();
    let mut s = vec![vec![0.0; m]; m];
    let mut l = vec![0.0; m];
    let mut before = vec![0.0; 2 * w];
    let mut after = vec![0.0; 2 * w];
    let mut g = vec![0.0; m];
    for _ in 0..n_samples {
        for x in before.iter_mut() {
            *x = sample_gamma(h, 1.0, &mut rng)?;
        }
        let sum = before[w - 1] + before[w];
        if !(sum > 0.0) {
            continue;
        }
        let alpha = before[w - 1] / sum;
        let nu = sum.sqrt() * sampler.nu_bar(alpha);
        let new0 = sum * sampler.sample_beta(alpha, &mut rng);
        let eta = before[w - 1] - new0;
        after.copy_from_slice(&before);
        after[w - 1] = new0;
        after[w] = sum - new0;
        space.gradients(&before, &after, &mut g);
        for i in 0..m {
            l[i] += nu * g[i] * eta;
            for j in 0..m {
                s[i][j] += nu * g[i] * g[j];
            }
        }
    }
    let n = n_samples.max(1) as f64;
    l.iter_mut().for_each(|x| *x /= n);
    s.iter_mut().flatten().for_each(|x| *x /= n);
    Ok((s, l))
}

/// One term `coef · Π_others ε^e · [ε_0'^a ε_1'^b − ε_0^a ε_1^b]` of a gradient.
#[derive(Debug, Clone)]
struct GradTerm {
    coef: f64,
    others: Vec<(i64, f64)>,
    pair: usize,
}

/// Gradient expansions of all basis functions over the shifts whose window
/// covers site 0 or 1, with the distinct pair exponents `(a, b)` they use.
fn gradient_terms(space: &TrialSpace) -> (Vec<Vec<GradTerm>>, Vec<(f64, f64)>) {
    let w = space.window as i64;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let terms = space
        .basis
        .iter()
        .map(|f| {
            let mut out = Vec::new();
            for t in &f.terms {
                for shift in (1 - w)..=1 {
                    let exp_at = |site: i64| {
                        let i = site - shift;
                        if (0..w).contains(&i) {
                            t.exponents[i as usize]
                        } else {
                            0.0
                        }
                    };
                    let (a, b) = (exp_at(0), exp_at(1));
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    let others = (0..w)
                        .map(|i| (shift + i, t.exponents[i as usize]))
                        .filter(|&(site, e)| site != 0 && site != 1 && e != 0.0)
                        .collect();
                    let pair = match pairs.iter().position(|&p| p == (a, b)) {
                        Some(p) => p,
                        None => {
                            pairs.push((a, b));
                            pairs.len() - 1
                        }
                    };
                    out.push(GradTerm {
                        coef: t.coef,
                        others,
                        pair,
                    });
                }
            }
            out
        })
        .collect();
    (terms, pairs)
}

/// `E[Π ε_site^e]` over independent `Gamma(h, 1)` sites.
fn others_moment(h: f64, a: &[(i64, f64)], b: &[(i64, f64)]) -> Result<f64, VariationalError> {
    let mut sites: Vec<(i64, f64)> = a.to_vec();
    for &(s, e) in b {
        match sites.iter_mut().find(|x| x.0 == s) {
            Some(x) => x.1 += e,
            None => sites.push((s, e)),
        }
    }
    let lg_h = log_gamma(h)?;
    let mut acc = 0.0;
    for (_, e) in sites {
        acc += log_gamma(h + e)? - lg_h;
    }
    Ok(acc.exp())
}

/// Deterministic assembly with the pair integrals done by adaptive
/// quadrature over the reduced simplex. Used as an oracle for [`assemble`].
pub fn assemble_exact(k: &Kernel, space: &TrialSpace, spec: &QuadratureSpec) -> Result<QuadraticProgram, VariationalError> {
    let h = k.half_d();
    check_dimension(space, h)?;
    let exp = Expansion::new(space, h);
    let np = exp.pairs.len();
    let mut val = PairIntegrals {
        cross: vec![vec![0.0; np]; np],
        linear: vec![0.0; np],
        quadratic: 0.0,
    };
    let mut err = val.clone();
    let dp = |q: (f64, f64), p: &crate::kernels::SimplexPoint| pair_diff(q, p.alpha, p.alpha_c, p.beta, p.beta_c);
    for i in 0..np {
        for j in i..np {
            let r = square_integral(k, |p| k.tilde_at(p) * dp(exp.pairs[i], p) * dp(exp.pairs[j], p), spec)?;
            val.cross[i][j] = r.value;
            val.cross[j][i] = r.value;
            err.cross[i][j] = r.error;
            err.cross[j][i] = r.error;
        }
        let r = square_integral(k, |p| k.tilde_at(p) * p.diff * dp(exp.pairs[i], p), spec)?;
        val.linear[i] = r.value;
        err.linear[i] = r.error;
    }
    let (s, s_error, l, l_error, _) = exp.combine(&val, &err)?;
    let ks = kappa_s(k, spec)?;
    Ok(QuadraticProgram {
        space_label: space.label(),
        s,
        l,
        kappa_s_ref: ks.value,
        kappa_s_ref_error: ks.error,
        s_error,
        l_error,
        kappa_s_mc: None,
        n_samples: 0,
        batches: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Minimizer of the quadratic form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalBound {
    pub space_label: String,
    pub kappa_var: f64,
    pub stderr: f64,
    pub coefficients: Vec<f64>,
    pub ridge: f64,
    pub min_eigenvalue: f64,
    pub kappa_s_ref: f64,
}

/// Solves `(S + λI) c = −L` by Cholesky and evaluates `κ_s + cᵀL + ½cᵀSc`.
///
/// The standard error comes from the batch values of the objective at the
/// fitted `c`, which is its linearization around the optimum; for exactly
/// assembled programs it is the propagated quadrature error.
pub fn minimize(qp: &QuadraticProgram) -> Result<VariationalBound, VariationalError> {
    let m = qp.len();
    let done = |c: Vec<f64>, kappa_var: f64, stderr: f64, ridge: f64, min_eig: f64| VariationalBound {
        space_label: qp.space_label.clone(),
        kappa_var,
        stderr,
        coefficients: c,
        ridge,
        min_eigenvalue: min_eig,
        kappa_s_ref: qp.kappa_s_ref,
    };
    let trace: f64 = (0..m).map(|i| qp.s[i][i]).sum();
    if m == 0 || !(trace > 0.0) {
        return Ok(done(vec![0.0; m], qp.kappa_s_ref, qp.kappa_s_ref_error, 0.0, 0.0));
    }
    let s = DMatrix::from_fn(m, m, |i, j| qp.s[i][j]);
    let l = DVector::from_vec(qp.l.clone());
    let min_eig = s.clone().symmetric_eigenvalues().min();
    let max_err = qp.s_error.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let jitter = 1e-9 * trace + 4.0 * m as f64 * max_err;
    if min_eig < -jitter {
        return Err(VariationalError::Indefinite {
            min_eigenvalue: min_eig,
            tolerance: jitter,
        });
    }
    let ridge = RIDGE_SCALE * trace / m as f64;
    let reg = &s + DMatrix::identity(m, m) * ridge;
    let chol = reg.cholesky().ok_or(VariationalError::Indefinite {
        min_eigenvalue: min_eig,
        tolerance: jitter,
    })?;
    let c = chol.solve(&(-&l));
    let objective = |s: &DMatrix<f64>, l: &DVector<f64>| c.dot(l) + 0.5 * c.dot(&(s * &c));
    let kappa_var = qp.kappa_s_ref + objective(&s, &l);

    let stderr = if qp.batches.len() >= 2 {
        let z: Vec<f64> = qp
            .batches
            .iter()
            .map(|b| {
                let sb = DMatrix::from_fn(m, m, |i, j| b.s[i][j]);
                let lb = DVector::from_vec(b.l.clone());
                objective(&sb, &lb)
            })
            .collect();
        let nb = z.len() as f64;
        let mean = z.iter().sum::<f64>() / nb;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        ((var / nb) + qp.kappa_s_ref_error.powi(2)).sqrt()
    } else {
        let lin: f64 = (0..m).map(|i| (c[i] * qp.l_error[i]).abs()).sum();
        let quad: f64 = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| 0.5 * (c[i] * c[j] * qp.s_error[i][j]).abs())
            .sum();
        lin + quad + qp.kappa_s_ref_error
    };
    Ok(done(c.iter().copied().collect(), kappa_var, stderr, ridge, min_eig))
}

/// One point of a convergence curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub label: String,
    pub size: usize,
    pub kappa_var: f64,
    pub stderr: f64,
    /// Set when the bound rose by more than 3σ over the previous space.
    pub non_monotone: bool,
}

/// Bounds over a sequence of nested trial spaces, with common random numbers.
pub fn kappa_upper_curve<S: ExchangeSampler + ?Sized>(
    sampler: &S,
    spaces: &[TrialSpace],
    kappa_s_ref: (f64, f64),
    n_samples: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>, VariationalError> {
    let mut out: Vec<CurvePoint> = Vec::with_capacity(spaces.len());
    for space in spaces {
        let b = minimize(&assemble(sampler, space, kappa_s_ref, n_samples, seed)?)?;
        let non_monotone = out.last().is_some_and(|prev| {
            let sigma = (prev.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            b.kappa_var > prev.kappa_var + 3.0 * sigma
        });
        out.push(CurvePoint {
            label: space.label(),
            size: space.len(),
            kappa_var: b.kappa_var,
            stderr: b.stderr,
            non_monotone,
        });
    }
    Ok(out)
}
