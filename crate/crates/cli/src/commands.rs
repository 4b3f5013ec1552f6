//! Command implementations and the mapping of failures to exit codes.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use energy_exchange::kernels::{check_conditions, make_kernel, ConditionReport, Kernel, KernelError};
use energy_exchange::numerics::RngStream;
use energy_exchange::observables::{static_report, ObservablesError, StaticReport, STATIC_CSV_HEADER};
use energy_exchange::simulator::{
    run_green_kubo, run_replica, write_trajectories_jsonl, EventLogWriter, ExchangeTable, GreenKuboEstimate,
    SimError,
};
use energy_exchange::variational::{
    assemble, assemble_exact, kappa_upper_curve, minimize, CurvePoint, QuadraticProgram, TrialSpace,
    VariationalBound, VariationalError,
};

use crate::config::RunConfig;
use crate::output::{num, read_json, result_path, write_csv, write_json};
use crate::{Cli, Command, Format};

pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_MISSING: u8 = 4;

/// Stream of the condition-check samples.
const CONDITIONS_STREAM: u64 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    fail(EXIT_USAGE, e.into())
}

fn kernel_code(e: &KernelError) -> u8 {
    match e {
        KernelError::Unknown { .. } | KernelError::InvalidCustom(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn observables_code(e: &ObservablesError) -> u8 {
    match e {
        ObservablesError::Kernel(k) => kernel_code(k),
        _ => EXIT_NUMERICAL,
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::InvalidConfig(_) | SimError::WrapAround { .. } | SimError::InvalidKernel(_) | SimError::Io(_) => {
            EXIT_USAGE
        }
        SimError::Kernel(k) => kernel_code(k),
        SimError::Observables(o) => observables_code(o),
        _ => EXIT_NUMERICAL,
    }
}

fn var_code(e: &VariationalError) -> u8 {
    match e {
        VariationalError::InvalidSpace(_) => EXIT_USAGE,
        VariationalError::Simulation(s) => sim_code(s),
        VariationalError::Observables(o) => observables_code(o),
        _ => EXIT_NUMERICAL,
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        fail(sim_code(&e), e.into())
    }
}

impl From<VariationalError> for Failure {
    fn from(e: VariationalError) -> Self {
        fail(var_code(&e), e.into())
    }
}

impl From<ObservablesError> for Failure {
    fn from(e: ObservablesError) -> Self {
        fail(observables_code(&e), e.into())
    }
}

impl From<KernelError> for Failure {
    fn from(e: KernelError) -> Self {
        fail(kernel_code(&e), e.into())
    }
}

type Outcome = Result<u8, Failure>;

/// Resolves the configuration, sets up the thread pool and dispatches.
pub fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.shared.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            RunConfig::from_toml(&text).map_err(usage)?
        }
        None => RunConfig::default(),
    };
    let s = &cli.shared;
    if let Some(k) = &s.kernel {
        cfg.kernel = k.clone();
    }
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    if let Some(t) = s.threads {
        cfg.threads = t;
    }
    if let Some(dir) = &s.out_dir {
        cfg.out_dir = dir.display().to_string();
    }
    match &cli.command {
        Command::Variational {
            window,
            degree,
            n_samples,
            no_half_power,
        } => {
            let v = &mut cfg.variational;
            v.window = window.unwrap_or(v.window);
            v.degree = degree.unwrap_or(v.degree);
            v.n_samples = n_samples.unwrap_or(v.n_samples);
            v.half_power &= !no_half_power;
        }
        Command::Simulate {
            temperature,
            n_sites,
            t_max,
            replicas,
            ..
        } => {
            let c = &mut cfg.simulation;
            c.temperature = temperature.unwrap_or(c.temperature);
            c.n_sites = n_sites.unwrap_or(c.n_sites);
            c.t_max = t_max.unwrap_or(c.t_max);
            c.n_replicas = replicas.unwrap_or(c.n_replicas);
        }
        _ => {}
    }
    let cfg = cfg.resolve();
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which keeps the earlier one.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let out_dir = PathBuf::from(&cfg.out_dir);
    if !matches!(cli.command, Command::Config) {
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating {}", out_dir.display()))
            .map_err(usage)?;
    }
    let fmt = s.format;
    match &cli.command {
        Command::KernelCheck => kernel_check(&cfg, &out_dir, fmt),
        Command::Static => static_cmd(&cfg, &out_dir, fmt),
        Command::Variational { .. } => variational(&cfg, &out_dir, fmt),
        Command::Simulate { event_log, .. } => simulate(&cfg, &out_dir, fmt, event_log.as_deref()),
        Command::Report => report(&cfg, &out_dir, fmt),
        Command::Config => {
            print!("{}", cfg.to_toml().map_err(usage)?);
            Ok(0)
        }
    }
}

fn kernel(cfg: &RunConfig) -> Result<Kernel, Failure> {
    Ok(make_kernel(&cfg.kernel)?)
}

fn emit<T: Serialize>(fmt: Format, result: &T, header: &str, rows: &[String]) -> Result<(), Failure> {
    match fmt {
        Format::Json => println!("{}", serde_json::to_string_pretty(result).map_err(usage)?),
        Format::Csv => {
            println!("{header}");
            for r in rows {
                println!("{r}");
            }
        }
    }
    Ok(())
}

const CONDITIONS_CSV_HEADER: &str = "kernel,d,tolerance,condition,worst_residual,samples,skipped,pass";

fn condition_rows(r: &ConditionReport) -> Vec<String> {
    [
        ("homogeneity", &r.homogeneity),
        ("symmetry", &r.symmetry),
        ("detailed_balance", &r.detailed_balance),
    ]
    .iter()
    .map(|(name, c)| {
        format!(
            "{},{},{},{name},{},{},{},{}",
            r.kernel,
            r.d,
            num(r.tolerance),
            num(c.worst_residual),
            c.samples,
            c.skipped,
            c.pass
        )
    })
    .collect()
}

fn kernel_check(cfg: &RunConfig, dir: &Path, fmt: Format) -> Outcome {
    let k = kernel(cfg)?;
    let mut rng = RngStream::new(cfg.seed, CONDITIONS_STREAM).rng();
    let r = check_conditions(&k, cfg.conditions.samples, cfg.conditions.tolerance, &mut rng);
    write_json(dir, "kernel-check", cfg, &r).map_err(usage)?;
    let rows = condition_rows(&r);
    write_csv(&result_path(dir, "kernel-check", &cfg.kernel, "csv"), CONDITIONS_CSV_HEADER, &rows).map_err(usage)?;
    emit(fmt, &r, CONDITIONS_CSV_HEADER, &rows)?;
    for (name, c) in [
        ("homogeneity", &r.homogeneity),
        ("symmetry", &r.symmetry),
        ("detailed balance", &r.detailed_balance),
    ] {
        if !c.pass {
            eprintln!("{}: {name} fails (worst residual {:e} at {:?})", r.kernel, c.worst_residual, c.worst_at);
        }
    }
    Ok(if r.all_pass() { 0 } else { EXIT_VERDICT })
}

fn static_cmd(cfg: &RunConfig, dir: &Path, fmt: Format) -> Outcome {
    let k = kernel(cfg)?;
    let r = static_report(&k, cfg.static_report.gradient_tol, &cfg.quadrature)?;
    write_json(dir, "static", cfg, &r).map_err(usage)?;
    let rows = vec![r.csv_row()];
    write_csv(&result_path(dir, "static", &cfg.kernel, "csv"), STATIC_CSV_HEADER, &rows).map_err(usage)?;
    emit(fmt, &r, STATIC_CSV_HEADER, &rows)?;
    eprintln!("{}", static_summary(&r));
    if !r.converged {
        eprintln!("{}: some quadratures missed their tolerance; the report is partial", r.kernel);
        return Ok(EXIT_NUMERICAL);
    }
    Ok(0)
}

fn static_summary(r: &StaticReport) -> String {
    let eq = |b: bool| if b { "=" } else { "≠" };
    let grad = match (r.is_gradient, r.gradient_c) {
        (true, Some(c)) => format!("gradient (C = {c:.6})"),
        (true, None) => "gradient".into(),
        (false, _) => format!("non-gradient (defect {:.3e})", r.gradient_defect),
    };
    format!(
        "{}: κ_f {:.10} {} κ_1 {:.10} {} κ_2 {:.10}; κ_s {:.10} {} κ_1; (3=4) {}; {}",
        r.kernel,
        r.kappa_f,
        eq(r.kappa_f_equals_kappa_1()),
        r.kappa_1,
        eq(r.kappa_1_equals_kappa_2()),
        r.kappa_2,
        r.kappa_s,
        eq(r.kappa_s_equals_kappa_1()),
        if r.condition_3_4_holds() { "holds" } else { "fails" },
        grad
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationalResult {
    pub kernel: String,
    pub space: TrialSpace,
    pub bound: VariationalBound,
    /// The same bound with the pair integrals done by quadrature.
    pub kappa_var_quadrature: Option<f64>,
    pub curve: Vec<CurveRow>,
    pub program: QuadraticProgram,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub degree: u32,
    pub half_power: bool,
    #[serde(flatten)]
    pub point: CurvePoint,
}

const CURVE_CSV_HEADER: &str = "kernel,degree,half_power,label,size,kappa_var,stderr,non_monotone";

fn variational(cfg: &RunConfig, dir: &Path, fmt: Format) -> Outcome {
    let k = kernel(cfg)?;
    let v = &cfg.variational;
    let table = ExchangeTable::build(&k, v.table_cells)?;
    let ks = energy_exchange::observables::kappa_s(&k, &cfg.quadrature)?;
    let ks = (ks.value, ks.error);

    let mut spaces = Vec::new();
    let mut tags = Vec::new();
    for deg in 1..=v.degree {
        spaces.push(TrialSpace::polynomial(v.window, deg, false, k.d())?);
        tags.push((deg, false));
    }
    if v.half_power {
        spaces.push(TrialSpace::polynomial(v.window, v.degree, true, k.d())?);
        tags.push((v.degree, true));
    }
    let curve: Vec<CurveRow> = kappa_upper_curve(&table, &spaces, ks, v.n_samples, cfg.seed)?
        .into_iter()
        .zip(tags)
        .map(|(point, (degree, half_power))| CurveRow {
            degree,
            half_power,
            point,
        })
        .collect();
    let space = spaces.pop().unwrap_or_else(|| TrialSpace::empty(k.d()));
    let program = assemble(&table, &space, ks, v.n_samples, cfg.seed)?;
    let bound = minimize(&program)?;
    let kappa_var_quadrature = assemble_exact(&k, &space, &cfg.quadrature)
        .and_then(|qp| minimize(&qp))
        .map(|b| b.kappa_var)
        .ok();
    let result = VariationalResult {
        kernel: cfg.kernel.clone(),
        space,
        bound,
        kappa_var_quadrature,
        curve,
        program,
    };
    write_json(dir, "variational", cfg, &result).map_err(usage)?;
    let rows: Vec<String> = result
        .curve
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{},{},{},{},{}",
                cfg.kernel,
                c.degree,
                c.half_power,
                c.point.label,
                c.point.size,
                num(c.point.kappa_var),
                num(c.point.stderr),
                c.point.non_monotone
            )
        })
        .collect();
    write_csv(&result_path(dir, "variational-curve", &cfg.kernel, "csv"), CURVE_CSV_HEADER, &rows).map_err(usage)?;
    emit(fmt, &result.bound, CURVE_CSV_HEADER, &rows)?;
    for w in &result.program.warnings {
        eprintln!("warning: {w}");
    }
    if result.curve.iter().any(|c| c.point.non_monotone) {
        eprintln!("warning: the bound rose by more than 3σ along the nested spaces; increase n_samples");
    }
    eprintln!(
        "{}: κ_var = {:.8} ± {:.2e} over {} (κ_s = {:.8})",
        cfg.kernel, result.bound.kappa_var, result.bound.stderr, result.space.label(), ks.0
    );
    Ok(0)
}

const LAGS_CSV_HEADER: &str = "kernel,temperature,tau,var_q_tot,var_current_integral,mean_h_integral,plain_ratio";

fn simulate(cfg: &RunConfig, dir: &Path, fmt: Format, event_log: Option<&Path>) -> Outcome {
    let k = kernel(cfg)?;
    let sim = &cfg.simulation;
    let table = ExchangeTable::build(&k, sim.table_cells)?;
    let run = run_green_kubo(sim, &table)?;
    let e = &run.estimate;
    write_json(dir, "simulate", cfg, e).map_err(usage)?;
    let path = result_path(dir, "trajectories", &cfg.kernel, "jsonl");
    let file = fs::File::create(&path).map_err(|err| usage(anyhow!("creating {}: {err}", path.display())))?;
    let mut w = BufWriter::new(file);
    write_trajectories_jsonl(&mut w, &run.trajectories)?;
    std::io::Write::flush(&mut w).map_err(usage)?;
    let rows: Vec<String> = e
        .lags
        .iter()
        .map(|l| {
            format!(
                "{},{},{},{},{},{},{}",
                cfg.kernel,
                num(sim.temperature),
                num(l.tau),
                num(l.var_q_tot),
                num(l.var_current_integral),
                num(l.mean_h_integral),
                num(l.plain_ratio)
            )
        })
        .collect();
    write_csv(&result_path(dir, "lags", &cfg.kernel, "csv"), LAGS_CSV_HEADER, &rows).map_err(usage)?;
    if let Some(log) = event_log {
        let file = fs::File::create(log).map_err(|err| usage(anyhow!("creating {}: {err}", log.display())))?;
        let mut writer = EventLogWriter::new(BufWriter::new(file));
        run_replica(sim, &table, 0, |ev| writer.record(ev))?;
        let n = writer.finish()?;
        eprintln!("wrote {n} events of replica 0 to {}", log.display());
    }
    emit(fmt, e, LAGS_CSV_HEADER, &rows)?;
    if e.nonlinearity_warning {
        eprintln!(
            "warning: Var(Q) is not linear over the fit window (curvature z = {:.1}); increase n_sites or t_max",
            e.curvature_z
        );
    }
    eprintln!(
        "{} at T = {}: κ̂ = {:.6} ± {:.6}; κ_s(sim) − κ = {:.3e} ± {:.1e}",
        cfg.kernel, sim.temperature, e.kappa_hat, e.stderr, e.gap, e.gap_stderr
    );
    Ok(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub kernel: String,
    pub temperature: f64,
    pub kappa_hat: f64,
    pub kappa_hat_stderr: f64,
    /// `κ_s(T) − κ(T)` from the simulation.
    pub simulated_gap: f64,
    pub simulated_gap_stderr: f64,
    /// Variational bound scaled to the simulation temperature.
    pub kappa_var: f64,
    pub kappa_var_stderr: f64,
    pub kappa_s: f64,
    pub kappa_1: f64,
    pub kappa_2: f64,
    pub kappa_f: f64,
    pub kappa_f_equals_kappa_s: bool,
    pub is_gradient: bool,
    /// `κ̂ ≤ κ_var + 3σ`
    pub simulation_below_bound: bool,
    /// `κ_var ≤ κ_s + 3σ`
    pub bound_below_static: bool,
    /// `κ_s − κ_var > 3σ`
    pub strict_gap: bool,
    pub statement: String,
    pub consistent: bool,
}

const REPORT_CSV_HEADER: &str = "kernel,temperature,kappa_hat,kappa_hat_stderr,simulated_gap,simulated_gap_stderr,\
kappa_var,kappa_var_stderr,kappa_s,kappa_1,kappa_2,kappa_f,kappa_f_equals_kappa_s,is_gradient,\
simulation_below_bound,bound_below_static,strict_gap,consistent,statement";

fn report(cfg: &RunConfig, dir: &Path, fmt: Format) -> Outcome {
    let kernel = &cfg.kernel;
    let paths = [
        ("static", result_path(dir, "static", kernel, "json")),
        ("variational", result_path(dir, "variational", kernel, "json")),
        ("simulate", result_path(dir, "simulate", kernel, "json")),
    ];
    let missing: Vec<String> = paths
        .iter()
        .filter(|(_, p)| !p.exists())
        .map(|(cmd, p)| format!("{} (run `energy-exchange {cmd} --kernel {kernel}`)", p.display()))
        .collect();
    if !missing.is_empty() {
        return Err(fail(EXIT_MISSING, anyhow!("missing upstream results:\n  {}", missing.join("\n  "))));
    }
    let bad = |e: anyhow::Error| fail(EXIT_MISSING, e);
    let st: StaticReport = read_json(&paths[0].1).map_err(bad)?.result;
    let var: VariationalResult = read_json(&paths[1].1).map_err(bad)?.result;
    let sim: GreenKuboEstimate = read_json(&paths[2].1).map_err(bad)?.result;
    let v = verdict(&st, &var, &sim);
    write_json(dir, "report", cfg, &v).map_err(usage)?;
    let row = format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
        v.kernel,
        num(v.temperature),
        num(v.kappa_hat),
        num(v.kappa_hat_stderr),
        num(v.simulated_gap),
        num(v.simulated_gap_stderr),
        num(v.kappa_var),
        num(v.kappa_var_stderr),
        num(v.kappa_s),
        num(v.kappa_1),
        num(v.kappa_2),
        num(v.kappa_f),
        v.kappa_f_equals_kappa_s,
        v.is_gradient,
        v.simulation_below_bound,
        v.bound_below_static,
        v.strict_gap,
        v.consistent,
        v.statement
    );
    write_csv(&result_path(dir, "report", kernel, "csv"), REPORT_CSV_HEADER, std::slice::from_ref(&row)).map_err(usage)?;
    emit(fmt, &v, REPORT_CSV_HEADER, &[row])?;
    eprintln!("{kernel}: {}", v.statement);
    Ok(if v.consistent { 0 } else { EXIT_VERDICT })
}

/// Orders the three estimates at the simulation temperature, using
/// `κ(T) = κ(1) √T` for the static and variational values.
pub fn verdict(st: &StaticReport, var: &VariationalResult, sim: &GreenKuboEstimate) -> Verdict {
    let root_t = sim.temperature.sqrt();
    let kappa_var = var.bound.kappa_var * root_t;
    let var_err = var.bound.stderr * root_t;
    let kappa_s = st.kappa_s * root_t;
    let combined = (sim.stderr.powi(2) + var_err.powi(2)).sqrt();
    let simulation_below_bound = sim.kappa_hat <= kappa_var + 3.0 * combined;
    let bound_below_static = kappa_var <= kappa_s + 3.0 * var_err;
    let strict_gap = kappa_s - kappa_var > 3.0 * var_err;
    let (statement, consistent) = if st.is_gradient {
        let equal = (sim.kappa_hat - kappa_s).abs() <= 3.0 * sim.stderr && !strict_gap;
        ("gradient kernel: κ = κ_s".to_string(), equal && simulation_below_bound && bound_below_static)
    } else {
        (
            format!(
                "non-gradient: κ < κ_s (κ_s − κ_var = {:.3e} ± {:.1e})",
                kappa_s - kappa_var,
                var_err
            ),
            strict_gap && simulation_below_bound && bound_below_static,
        )
    };
    Verdict {
        kernel: st.kernel.clone(),
        temperature: sim.temperature,
        kappa_hat: sim.kappa_hat,
        kappa_hat_stderr: sim.stderr,
        simulated_gap: sim.gap,
        simulated_gap_stderr: sim.gap_stderr,
        kappa_var,
        kappa_var_stderr: var_err,
        kappa_s,
        kappa_1: st.kappa_1 * root_t,
        kappa_2: st.kappa_2 * root_t,
        kappa_f: st.kappa_f * root_t,
        kappa_f_equals_kappa_s: st.kappa_f_equals_kappa_1() && st.kappa_s_equals_kappa_1(),
        is_gradient: st.is_gradient,
        simulation_below_bound,
        bound_below_static,
        strict_gap,
        statement,
        consistent,
    }
}
