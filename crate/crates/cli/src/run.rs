use std::fmt::Write as _;
use std::io::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use rumor_core::clt::{self, CovarianceMethod, FluctuationResult};
use rumor_core::io::{self, fmt_f64, SweepRow, RUNS_HEADER};
use rumor_core::rng::splitmix64;
use rumor_core::ssa::RunOutcome;
use rumor_core::{
    gof_test, run_ensemble, run_ensemble_with_workers, scaled_fluctuations, simulate,
    solve_asymptotics, AsymptoticSolution, DeterministicPath, EnsembleSummary, GofReport,
    InitialFractions, ModelParams, RecordMode, SimConfig, TrajectoryRecord,
};
use serde::Serialize;

use crate::args::{
    grid_points, Cli, Command, EnsembleArgs, Format, GridAxis, Method, ModelArgs, ModelValues,
    OutputArgs, Record, SimArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(rumor_core::Error),
    Io(std::io::Error),
}

impl From<rumor_core::Error> for CliError {
    fn from(e: rumor_core::Error) -> Self {
        Self::Core(e)
    }
}

impl From<rumor_core::NumericalError> for CliError {
    fn from(e: rumor_core::NumericalError) -> Self {
        Self::Core(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Core(rumor_core::Error::Validation(_)) => 3,
            Self::Core(rumor_core::Error::Numerical(_)) => 4,
            Self::Io(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Core(rumor_core::Error::Validation(e)) => write!(f, "invalid input: {e}"),
            Self::Core(rumor_core::Error::Numerical(e)) => write!(f, "numerical failure: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

/// Whether a verification command found the data consistent with theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

fn model_of(args: &ModelArgs) -> Result<(ModelParams, InitialFractions), CliError> {
    let v = args.values(&[]).map_err(|missing| {
        CliError::Usage(format!("missing required flags: {}", missing.join(", ")))
    })?;
    Ok(v.model())
}

fn resolve_seed(sim: &SimArgs) -> (u64, bool) {
    match sim.seed {
        Some(s) => (s, false),
        None => {
            let nanos = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_nanos() as u64)
                .unwrap_or(0);
            let seed = splitmix64(nanos ^ (u64::from(std::process::id()) << 32));
            eprintln!("seed = {seed}");
            (seed, true)
        }
    }
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &out.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn ensemble(
    params: ModelParams,
    init: InitialFractions,
    sim: &SimArgs,
    ens: &EnsembleArgs,
    seed: u64,
) -> Result<EnsembleSummary, CliError> {
    let cfg = SimConfig::new(sim.n, seed);
    let summary = match ens.threads {
        Some(w) => run_ensemble_with_workers(params, init, cfg, ens.runs, w)?,
        None => run_ensemble(params, init, cfg, ens.runs)?,
    };
    Ok(summary)
}

/// Runs one command and writes its output.
pub fn run(cli: Cli) -> Result<Verdict, CliError> {
    match cli.command {
        Command::Simulate {
            model,
            sim,
            record,
            dt,
            out,
        } => cmd_simulate(&model, &sim, record, dt, &out),
        Command::Ensemble {
            model,
            sim,
            ens,
            out,
        } => cmd_ensemble(&model, &sim, &ens, &out),
        Command::Limit { model, out } => cmd_limit(&model, &out),
        Command::Clt { model, method, out } => cmd_clt(&model, method, &out),
        Command::Ode {
            model,
            tmax,
            steps,
            out,
        } => cmd_ode(&model, tmax, steps, &out),
        Command::VerifyWlln {
            model,
            sim,
            ens,
            tol,
            out,
        } => cmd_verify_wlln(&model, &sim, &ens, tol, &out),
        Command::VerifyClt {
            model,
            sim,
            ens,
            cov_rel_tol,
            cov_min,
            mean_se,
            min_p_value,
            out,
        } => {
            let tol = CltTolerances {
                cov_rel: cov_rel_tol,
                cov_min,
                mean_se,
                min_p_value,
            };
            cmd_verify_clt(&model, &sim, &ens, tol, &out)
        }
        Command::Sweep { model, grid, out } => cmd_sweep(&model, &grid, &out),
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    seed: u64,
    seed_generated: bool,
    n: u64,
    record: &'a TrajectoryRecord,
}

fn runs_csv(runs: &[RunOutcome]) -> String {
    let mut s = format!("{RUNS_HEADER}\n");
    for (i, r) in runs.iter().enumerate() {
        let f = r.final_state;
        writeln!(
            s,
            "{i},{},{},{},{},{},{}",
            f.x1,
            f.x2,
            f.y1,
            f.z,
            fmt_f64(r.tau),
            r.events
        )
        .unwrap();
    }
    s
}

fn cmd_simulate(
    model: &ModelArgs,
    sim: &SimArgs,
    record: Record,
    dt: f64,
    out: &OutputArgs,
) -> Result<Verdict, CliError> {
    let (params, init) = model_of(model)?;
    let (seed, generated) = resolve_seed(sim);
    let mode = match record {
        Record::Final => RecordMode::FinalOnly,
        Record::Event => RecordMode::EventLog,
        Record::Sampled => RecordMode::Sampled { dt },
    };
    let rec = simulate(
        params,
        init,
        SimConfig::new(sim.n, seed).with_record_mode(mode),
    )?;
    let text = match out.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&SimulateOutput {
            seed,
            seed_generated: generated,
            n: sim.n,
            record: &rec,
        }),
        Format::Csv => match record {
            Record::Event => io::event_csv(&rec),
            Record::Sampled => io::sampled_csv(&rec),
            Record::Final => runs_csv(&[RunOutcome {
                final_state: rec.final_state,
                tau: rec.absorption_time,
                events: rec.event_count,
            }]),
        },
    };
    emit(out, &text)?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct EnsembleOutput<'a> {
    seed_generated: bool,
    #[serde(flatten)]
    summary: &'a EnsembleSummary,
}

fn cmd_ensemble(
    model: &ModelArgs,
    sim: &SimArgs,
    ens: &EnsembleArgs,
    out: &OutputArgs,
) -> Result<Verdict, CliError> {
    let (params, init) = model_of(model)?;
    let (seed, generated) = resolve_seed(sim);
    let summary = ensemble(params, init, sim, ens, seed)?;
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&EnsembleOutput {
            seed_generated: generated,
            summary: &summary.without_runs(),
        }),
        Format::Csv => runs_csv(&summary.runs),
    };
    emit(out, &text)?;
    Ok(Verdict::Pass)
}

fn cmd_limit(model: &ModelArgs, out: &OutputArgs) -> Result<Verdict, CliError> {
    let (params, init) = model_of(model)?;
    let asym = solve_asymptotics(params, init)?;
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&asym),
        Format::Csv => format!(
            "x1_inf,x2_inf,tau_inf,y1_prime_at_tau,degenerate\n{},{},{},{},{}\n",
            fmt_f64(asym.x1_inf),
            fmt_f64(asym.x2_inf),
            fmt_f64(asym.tau_inf),
            fmt_f64(asym.y1_prime_at_tau),
            asym.degenerate
        ),
    };
    emit(out, &text)?;
    Ok(Verdict::Pass)
}

fn fluctuation_csv(r: &FluctuationResult) -> String {
    let mut rows: Vec<(String, f64)> = vec![
        ("tau_inf".into(), r.tau_inf),
        ("k1".into(), r.k1),
        ("k2".into(), r.k2),
        ("s11".into(), r.sigma[0][0]),
        ("s12".into(), r.sigma[0][1]),
        ("s22".into(), r.sigma[1][1]),
    ];
    for i in 0..3 {
        for j in i..3 {
            rows.push((format!("c{}{}", i + 1, j + 1), r.c[i][j]));
        }
    }
    if let Some(dev) = r.closed_form_deviation {
        for (name, d) in dev.entries() {
            rows.push((format!("closed_form_minus_quadrature_{name}"), d));
        }
    }
    rows.push(("g33_discrepancy".into(), r.g33_discrepancy));
    let mut s = String::from("quantity,value\n");
    for (k, v) in rows {
        writeln!(s, "{k},{}", fmt_f64(v)).unwrap();
    }
    s
}

fn cmd_clt(model: &ModelArgs, method: Method, out: &OutputArgs) -> Result<Verdict, CliError> {
    let (params, init) = model_of(model)?;
    let asym = solve_asymptotics(params, init)?;
    let method = match method {
        Method::Quadrature => CovarianceMethod::Quadrature,
        Method::ClosedForm => CovarianceMethod::ClosedForm,
    };
    let r = clt::fluctuations(params, init, &asym, method)?;
    if let Some(dev) = r.closed_form_deviation {
        let off = dev.mismatches();
        if !off.is_empty() {
            eprintln!(
                "closed form disagrees with quadrature on {}",
                off.join(", ")
            );
        }
    }
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&r),
        Format::Csv => fluctuation_csv(&r),
    };
    emit(out, &text)?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct OdePoint {
    t: f64,
    x1: f64,
    x2: f64,
    y1: f64,
}

fn cmd_ode(
    model: &ModelArgs,
    tmax: f64,
    steps: usize,
    out: &OutputArgs,
) -> Result<Verdict, CliError> {
    let (params, init) = model_of(model)?;
    let (params, init) = rumor_core::validate(params, init).map_err(rumor_core::Error::from)?;
    if !(tmax.is_finite() && tmax > 0.0) || steps == 0 {
        return Err(CliError::Usage(
            "--tmax must be > 0 and --steps >= 1".into(),
        ));
    }
    let path = DeterministicPath::new(params, init);
    let text = match out.format.unwrap_or(Format::Csv) {
        Format::Csv => io::ode_csv(&path, tmax, steps),
        Format::Json => {
            let pts: Vec<OdePoint> = (0..=steps)
                .map(|k| {
                    let t = tmax * k as f64 / steps as f64;
                    let [x1, x2, y1] = path.eval(t);
                    OdePoint { t, x1, x2, y1 }
                })
                .collect();
            to_json(&pts)
        }
    };
    emit(out, &text)?;
    Ok(Verdict::Pass)
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    value: f64,
    limit: f64,
    passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value >= limit,
        }
    }
}

fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,value,limit,passed\n");
    for c in checks {
        writeln!(
            s,
            "{},{},{},{}",
            c.name,
            fmt_f64(c.value),
            fmt_f64(c.limit),
            c.passed
        )
        .unwrap();
    }
    s
}

fn verdict(checks: &[Check]) -> Verdict {
    if checks.iter().all(|c| c.passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Serialize)]
struct WllnOutput<'a> {
    passed: bool,
    tolerance: f64,
    seed_generated: bool,
    target: &'a AsymptoticSolution,
    checks: &'a [Check],
    summary: &'a EnsembleSummary,
}

fn cmd_verify_wlln(
    model: &ModelArgs,
    sim: &SimArgs,
    ens: &EnsembleArgs,
    tol: f64,
    out: &OutputArgs,
) -> Result<Verdict, CliError> {
    let (params, init) = model_of(model)?;
    let asym = solve_asymptotics(params, init)?;
    let (seed, generated) = resolve_seed(sim);
    let summary = ensemble(params, init, sim, ens, seed)?.without_runs();
    let checks = vec![
        Check::at_most(
            "abs_dev_mean_x1",
            (summary.mean_x1_frac - asym.x1_inf).abs(),
            tol,
        ),
        Check::at_most(
            "abs_dev_mean_x2",
            (summary.mean_x2_frac - asym.x2_inf).abs(),
            tol,
        ),
    ];
    let v = verdict(&checks);
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&WllnOutput {
            passed: v == Verdict::Pass,
            tolerance: tol,
            seed_generated: generated,
            target: &asym,
            checks: &checks,
            summary: &summary,
        }),
        Format::Csv => checks_csv(&checks),
    };
    emit(out, &text)?;
    Ok(v)
}

#[derive(Debug, Clone, Copy, Serialize)]
struct CltTolerances {
    cov_rel: f64,
    cov_min: f64,
    mean_se: f64,
    min_p_value: f64,
}

#[derive(Serialize)]
struct CltOutput<'a> {
    passed: bool,
    tolerances: CltTolerances,
    seed_generated: bool,
    target: &'a FluctuationResult,
    gof: &'a GofReport,
    checks: &'a [Check],
    summary: &'a EnsembleSummary,
}

fn clt_checks(gof: &GofReport, sigma: &[[f64; 2]; 2], tol: CltTolerances) -> Vec<Check> {
    let mut checks = Vec::new();
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        if sigma[i][j].abs() > tol.cov_min {
            let rel = gof.cov_rel_err[i][j].map_or(f64::INFINITY, f64::abs);
            checks.push(Check::at_most(
                format!("cov_rel_err_{}{}", i + 1, j + 1),
                rel,
                tol.cov_rel,
            ));
        }
    }
    for k in 0..2 {
        let z = if gof.std_err[k] > 0.0 {
            gof.mean[k].abs() / gof.std_err[k]
        } else if gof.mean[k] == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        checks.push(Check::at_most(
            format!("mean_{}_in_se", k + 1),
            z,
            tol.mean_se,
        ));
    }
    checks.push(Check::at_least("gof_p_value", gof.p_value, tol.min_p_value));
    checks
}

fn cmd_verify_clt(
    model: &ModelArgs,
    sim: &SimArgs,
    ens: &EnsembleArgs,
    tol: CltTolerances,
    out: &OutputArgs,
) -> Result<Verdict, CliError> {
    let (params, init) = model_of(model)?;
    let asym = solve_asymptotics(params, init)?;
    let target = clt::sigma(params, init, &asym)?;
    let (seed, generated) = resolve_seed(sim);
    let summary = ensemble(params, init, sim, ens, seed)?;
    let z = scaled_fluctuations(&summary, &asym)?;
    let gof = gof_test(&z, target.sigma)?;
    let checks = clt_checks(&gof, &target.sigma, tol);
    let v = verdict(&checks);
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&CltOutput {
            passed: v == Verdict::Pass,
            tolerances: tol,
            seed_generated: generated,
            target: &target,
            gof: &gof,
            checks: &checks,
            summary: &summary.without_runs(),
        }),
        Format::Csv => checks_csv(&checks),
    };
    emit(out, &text)?;
    Ok(v)
}

fn cmd_sweep(model: &ModelArgs, grid: &[GridAxis], out: &OutputArgs) -> Result<Verdict, CliError> {
    let provided: Vec<_> = grid.iter().map(|a| a.param).collect();
    let base: ModelValues = model.values(&provided).map_err(|missing| {
        CliError::Usage(format!("missing required flags: {}", missing.join(", ")))
    })?;
    let rows = grid_points(base, grid)
        .into_iter()
        .map(|pt| {
            let (params, init) = pt.model();
            SweepRow::compute(params, init)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let text = match out.format.unwrap_or(Format::Csv) {
        Format::Csv => io::sweep_csv(&rows),
        Format::Json => to_json(&rows),
    };
    emit(out, &text)?;
    Ok(Verdict::Pass)
}
