//! Acceptance suite: one pass/fail line per criterion, tolerances pinned.
//! Runs as a plain binary so the lines print in order with timings.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use energy_exchange::kernels::{make_kernel, Kernel, BUILTIN_KERNELS};
use energy_exchange::numerics::{QuadratureSpec, RngStream};
use energy_exchange::observables::{static_report, StaticReport, DEFAULT_GRADIENT_TOL};
use energy_exchange::simulator::{
    equilibrium_invariance_test, init_equilibrium, run_green_kubo, scaling_check, ExchangeTable, SimConfig,
    DEFAULT_CELLS,
};
use energy_exchange::variational::{assemble, minimize, TrialSpace};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn(&mut Context) -> Outcome);

struct Context {
    kernels: BTreeMap<&'static str, Kernel>,
    reports: BTreeMap<&'static str, StaticReport>,
    tables: BTreeMap<&'static str, ExchangeTable>,
    /// gg3 variational bound and its standard error.
    gg3_bound: Option<(f64, f64)>,
}

impl Context {
    fn new() -> Result<Self, String> {
        let spec = QuadratureSpec::default();
        let mut kernels = BTreeMap::new();
        let mut reports = BTreeMap::new();
        for name in BUILTIN_KERNELS {
            let k = make_kernel(name).map_err(|e| e.to_string())?;
            reports.insert(name, static_report(&k, DEFAULT_GRADIENT_TOL, &spec).map_err(|e| e.to_string())?);
            kernels.insert(name, k);
        }
        Ok(Self {
            kernels,
            reports,
            tables: BTreeMap::new(),
            gg3_bound: None,
        })
    }

    fn table(&mut self, name: &'static str) -> Result<&ExchangeTable, String> {
        if !self.tables.contains_key(name) {
            let t = ExchangeTable::build(&self.kernels[name], DEFAULT_CELLS).map_err(|e| e.to_string())?;
            self.tables.insert(name, t);
        }
        Ok(&self.tables[name])
    }
}

fn sim(kernel: &str, temperature: f64) -> SimConfig {
    SimConfig {
        kernel: kernel.into(),
        temperature,
        n_sites: 256,
        n_replicas: 64,
        t_max: 200.0,
        ..SimConfig::default()
    }
}

fn c1(cx: &mut Context) -> Outcome {
    let gg3 = &cx.reports["gg3"];
    let gg3_vals = [gg3.kappa_f, gg3.kappa_1, gg3.kappa_2, gg3.kappa_s];
    let gg3_ok = gg3_vals.iter().all(|v| (v - 1.0).abs() < 1e-6);
    let gg2 = &cx.reports["gg2"];
    let gg2_vals = [gg2.kappa_f, gg2.kappa_1, gg2.kappa_2, gg2.kappa_s];
    let spread = gg2_vals.iter().fold(f64::MIN, |a, &b| a.max(b)) - gg2_vals.iter().fold(f64::MAX, |a, &b| a.min(b));
    // common gg2 value, frozen from quadrature
    let gg2_ok = spread < 1e-6 && (gg2.kappa_s - 1.0).abs() < 1e-6;
    Ok((
        gg3_ok && gg2_ok,
        format!(
            "gg3 (κ_f, κ_1, κ_2, κ_s) = ({:.9}, {:.9}, {:.9}, {:.9}); gg2 common value {:.9}, spread {spread:.1e}",
            gg3_vals[0], gg3_vals[1], gg3_vals[2], gg3_vals[3], gg2.kappa_s
        ),
    ))
}

fn c2(cx: &mut Context) -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, r) in &cx.reports {
        let a = (r.kappa_1 - r.kappa_2).abs();
        let b = (r.kappa_s - r.kappa_1).abs();
        worst = worst.max(a).max(b);
        parts.push(format!("{name} {:.1e}/{:.1e}", a, b));
    }
    Ok((worst < 1e-8, format!("|κ_1−κ_2| / |κ_s−κ_1|: {}", parts.join(", "))))
}

fn c3(cx: &mut Context) -> Outcome {
    let res = |n: &str| (cx.reports[n].cond34_lhs - cx.reports[n].cond34_rhs).abs();
    let u = &cx.reports["uniform"];
    // uniform: lhs 1, rhs 35/48
    let want = 13.0 / 48.0;
    let ok = res("gg2") < 1e-7
        && res("gg3") < 1e-7
        && (res("uniform") - want).abs() < 1e-8
        && (u.kappa_f - 1.3293).abs() < 1e-4
        && (u.kappa_1 - 0.9693).abs() < 1e-4;
    Ok((
        ok,
        format!(
            "residual gg2 {:.1e}, gg3 {:.1e}; uniform |lhs−rhs| = {:.9} (13/48 = {want:.9}), κ_f {:.6} ≠ κ_1 {:.6}",
            res("gg2"),
            res("gg3"),
            res("uniform"),
            u.kappa_f,
            u.kappa_1
        ),
    ))
}

fn c4(cx: &mut Context) -> Outcome {
    let re = &cx.reports["root-eta"];
    let c_ok = re.is_gradient && re.gradient_c.is_some_and(|c| (c - 2.0 / 3.0).abs() < 1e-6);
    let defects: Vec<(&str, f64)> = ["gg2", "gg3", "uniform"]
        .iter()
        .map(|&n| (n, cx.reports[n].gradient_defect))
        .collect();
    let ok = c_ok && defects.iter().all(|&(n, d)| d > 1e-4 && !cx.reports[n].is_gradient);
    Ok((
        ok,
        format!(
            "root-eta gradient = {}, C = {:.9}; defects {}",
            re.is_gradient,
            re.gradient_c.unwrap_or(f64::NAN),
            defects.iter().map(|(n, d)| format!("{n} {d:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn c5(cx: &mut Context) -> Outcome {
    let worst = cx.reports.values().map(|r| r.identity_residual.abs()).fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("max |∫∫(α−β)W̃| = {worst:.2e} over {} kernels", cx.reports.len())))
}

fn c6(cx: &mut Context) -> Outcome {
    let n_samples = 10_000_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for name in BUILTIN_KERNELS {
        let d = cx.kernels[name].d();
        let ks = (cx.reports[name].kappa_s, cx.reports[name].kappa_s_err);
        let space = TrialSpace::polynomial(2, 3, true, d).map_err(|e| e.to_string())?;
        let table = cx.table(name)?;
        let b = minimize(&assemble(table, &space, ks, n_samples, 1).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let gap = ks.0 - b.kappa_var;
        let sigma = b.stderr;
        ok &= b.kappa_var <= ks.0 + 3.0 * sigma;
        match name {
            "root-eta" => ok &= gap.abs() <= 3.0 * sigma && sigma <= 2e-3,
            "gg3" | "uniform" => ok &= gap > 3.0 * sigma,
            _ => {}
        }
        if name == "gg3" {
            cx.gg3_bound = Some((b.kappa_var, sigma));
        }
        parts.push(format!("{name} κ_s−κ_var = {gap:.3e} ± {sigma:.1e}"));
    }
    Ok((ok, format!("{} (w=2, degree 3, 1e7 samples)", parts.join("; "))))
}

fn c7(cx: &mut Context) -> Outcome {
    let table = cx.table("root-eta")?;
    let e = run_green_kubo(&sim("root-eta", 1.0), table).map_err(|e| e.to_string())?.estimate;
    let target = 0.75 * std::f64::consts::PI.sqrt();
    let rel = (e.kappa_hat - target).abs() / target;
    Ok((
        rel < 0.05,
        format!("κ̂ = {:.5} ± {:.5} vs 3√π/4 = {target:.5} ({:.2}% off)", e.kappa_hat, e.stderr, 100.0 * rel),
    ))
}

fn c8(cx: &mut Context) -> Outcome {
    let (kv, kv_err) = cx.gg3_bound.ok_or("criterion 6 did not produce a gg3 bound")?;
    let ks = cx.reports["gg3"].kappa_s;
    let table = cx.table("gg3")?;
    let e = run_green_kubo(&sim("gg3", 1.0), table).map_err(|e| e.to_string())?.estimate;
    let headline_z = (ks - e.kappa_hat) / e.stderr;
    // κ̂ = κ_s − (simulated gap): same target, static part exact
    let k = e.kappa_exact_static.ok_or("no exact static part")?;
    let s = e.kappa_exact_static_stderr.ok_or("no exact static part")?;
    let z = (ks - k) / s;
    let ok = z >= 2.0 && k > 0.8 && k <= kv + 3.0 * (s * s + kv_err * kv_err).sqrt();
    Ok((
        ok,
        format!(
            "κ̂ = κ_s − gap = {k:.6} ± {s:.6} ({z:.1}σ below κ_s, κ_var = {kv:.6}); \
             direct κ̂ = {:.5} ± {:.5} ({headline_z:.1}σ below κ_s)",
            e.kappa_hat, e.stderr
        ),
    ))
}

fn c9(cx: &mut Context) -> Outcome {
    let table = cx.table("root-eta")?;
    let t = scaling_check(&sim("root-eta", 1.0), table, &[0.25, 1.0, 4.0]).map_err(|e| e.to_string())?;
    let dev = t.max_relative_deviation.ok_or("no scaling rows")?;
    let scaled: Vec<String> = t.rows.iter().map(|r| format!("{:.4}", r.scaled)).collect();
    let kf = cx.reports["gg3"].kappa_f;
    let table = cx.table("gg3")?;
    let mut rate_ok = true;
    let mut rates = Vec::new();
    for temp in [1.0, 4.0] {
        let e = run_green_kubo(&sim("gg3", temp), table).map_err(|e| e.to_string())?.estimate;
        let want = kf * f64::sqrt(temp);
        let z = (e.event_rate_per_bond - want) / e.event_rate_stderr;
        rate_ok &= z.abs() <= 3.0;
        rates.push(format!("T={temp}: {:.5} vs {want:.5} ({z:+.1}σ)", e.event_rate_per_bond));
    }
    Ok((
        dev < 0.07 && rate_ok,
        format!(
            "root-eta κ̂/√T = [{}] (max deviation {:.2}%); gg3 rate per bond {}",
            scaled.join(", "),
            100.0 * dev,
            rates.join(", ")
        ),
    ))
}

fn c10(cx: &mut Context) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in BUILTIN_KERNELS {
        let cfg = SimConfig {
            n_replicas: 8,
            ..sim(name, 1.0)
        };
        let table = cx.table(name)?;
        let r = equilibrium_invariance_test(&cfg, table).map_err(|e| e.to_string())?;
        // one long chain for the drift budget
        let mut rng = RngStream::new(cfg.seed, 9).rng();
        let mut state = init_equilibrium(&cfg, table, &mut rng).map_err(|e| e.to_string())?;
        let e0 = state.total_energy();
        let mut t = 0.0;
        while state.events < 1_000_000 {
            t += 100.0;
            state.run_until(table, t, &mut rng, |_| {});
        }
        let drift = (state.total_energy() - e0).abs() / e0 * 1e6 / state.events as f64;
        ok &= r.passed && r.ks.p_value > 0.01 && drift <= 1e-12;
        parts.push(format!(
            "{name} p = {:.3} (marginal {:.3}), drift {drift:.1e}",
            r.ks.p_value, r.ks_marginal.p_value
        ));
    }
    Ok((ok, format!("{} per 1e6 events", parts.join("; "))))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut cx = match Context::new() {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL  setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    let criteria: [Criterion; 10] = [
        ("exact constants", c1),
        ("κ_1 = κ_2 = κ_s for every kernel", c2),
        ("condition (3=4) both directions", c3),
        ("gradient diagnosis both directions", c4),
        ("identity ∫∫(α−β)W̃ = 0", c5),
        ("variational bound below κ_s", c6),
        ("simulated κ for root-eta", c7),
        ("simulated κ < κ_s for gg3", c8),
        ("temperature scaling", c9),
        ("conservation and stationarity", c10),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = f(&mut cx).unwrap_or_else(|e| (false, format!("error: {e}")));
        passed += usize::from(ok);
        println!(
            "{}  {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {passed}/{} passed in {:.0}s",
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if passed == criteria.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
