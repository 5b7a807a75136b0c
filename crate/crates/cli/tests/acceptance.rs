//! Exit criteria. Each check prints one PASS/FAIL line; the process fails if
//! any check fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumor_core::clt::{
    self, covariance_quadrature, diffusion, fundamental_matrix, project_covariance,
    CovarianceMethod, CLOSED_FORM_TOL,
};
use rumor_core::limit::f_eval;
use rumor_core::linalg::{max_abs_diff3, mul3, sym_eigenvalues2, sym_eigenvalues3, IDENTITY3};
use rumor_core::model::{normalize_rates, rates, time_changed_rates};
use rumor_core::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn reference() -> (ModelParams, InitialFractions) {
    (
        ModelParams::new(0.5, 1.0, 0.5, 0.8),
        InitialFractions::new(0.45, 0.5, 0.05),
    )
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn near_basic_total() -> Outcome {
    let params = ModelParams::new(0.99, 1.0, 1.0, 1.0);
    let init = InitialFractions::new(0.99, 0.01, 0.0);
    let start = Instant::now();
    let s = solve_asymptotics(params, init).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let total = s.x1_inf + s.x2_inf;
    // W0(-1.99 e^{-1.99}) = -0.40981436072495325 gives 0.20593686468590613
    let oracle = 0.205_936_864_685_906_13;
    check(
        (0.195..=0.215).contains(&total)
            && (total - oracle).abs() < 1e-10
            && elapsed < Duration::from_millis(1),
        format!("x1_inf + x2_inf = {total:.12} (closed form {oracle:.12}), {elapsed:?}"),
    )
}

fn lambert_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let theta: f64 = rng.random_range(0.1..0.9);
        let x10 = theta * rng.random_range(0.05..0.95);
        let y10 = (theta - x10) * rng.random_range(0.0..1.0);
        let x20 = (1.0 - theta) * rng.random_range(0.05..1.0);
        let lambda = rng.random_range(0.2..5.0);
        let params = ModelParams::new(theta, lambda, lambda, 1.0);
        let init = InitialFractions::new(x10, x20, y10);
        let (l1, l2) = lambert_solution(params, init).map_err(|e| e.to_string())?;
        let s = solve_asymptotics(params, init).map_err(|e| e.to_string())?;
        worst = worst.max((l1 - s.x1_inf).abs()).max((l2 - s.x2_inf).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-10 && elapsed < Duration::from_secs(1),
        format!("max componentwise gap {worst:.3e} over 50 points, {elapsed:?}"),
    )
}

fn law_of_large_numbers() -> Outcome {
    let (params, init) = reference();
    // grid-scan oracle values
    let (x1_oracle, x2_oracle) = (0.160_873_166_568_389_18, 0.298_954_815_025_419_65);
    let asym = solve_asymptotics(params, init).map_err(|e| e.to_string())?;
    if (asym.x1_inf - x1_oracle).abs() > 1e-12 || (asym.x2_inf - x2_oracle).abs() > 1e-12 {
        return Err(format!("solver disagrees with oracle: {asym:?}"));
    }
    let start = Instant::now();
    let e = run_ensemble(params, init, SimConfig::new(100_000, 20_240_601), 200)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (d1, d2) = (e.mean_x1_frac - asym.x1_inf, e.mean_x2_frac - asym.x2_inf);
    check(
        d1.abs() <= 0.005 && d2.abs() <= 0.005 && elapsed < Duration::from_secs(300),
        format!("N = 1e5, m = 200: mean deviations ({d1:.2e}, {d2:.2e}), {elapsed:?}"),
    )
}

fn central_limit() -> Outcome {
    let (params, init) = reference();
    let start = Instant::now();
    let asym = solve_asymptotics(params, init).map_err(|e| e.to_string())?;
    let target = sigma(params, init, &asym).map_err(|e| e.to_string())?;
    let e = run_ensemble(params, init, SimConfig::new(10_000, 20_240_602), 2000)
        .map_err(|e| e.to_string())?;
    let z = scaled_fluctuations(&e, &asym).map_err(|e| e.to_string())?;
    let r = gof_test(&z, target.sigma).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(600);
    let mut worst_rel = 0.0_f64;
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        if target.sigma[i][j].abs() > 0.01 {
            let rel = r.cov_rel_err[i][j].map_or(f64::INFINITY, f64::abs);
            worst_rel = worst_rel.max(rel);
            ok &= rel <= 0.15;
        }
    }
    let se = [r.mean[0] / r.std_err[0], r.mean[1] / r.std_err[1]];
    ok &= se.iter().all(|v| v.abs() <= 3.0);
    ok &= r.p_value > 0.01;
    check(
        ok,
        format!(
            "N = 1e4, m = 2000: max cov rel err {worst_rel:.3}, means ({:.2}, {:.2}) SE, p = {:.3}, {elapsed:?}",
            se[0], se[1], r.p_value
        ),
    )
}

fn closed_form_agreement() -> Outcome {
    let start = Instant::now();
    let cases = [
        (
            ModelParams::new(0.5, 1.0, 0.5, 0.8),
            InitialFractions::new(0.45, 0.5, 0.05),
        ),
        (
            ModelParams::new(0.5, 0.5, 1.0, 1.0),
            InitialFractions::new(0.3, 0.5, 0.05),
        ),
        (
            ModelParams::new(0.7, 3.0, 0.4, 0.2),
            InitialFractions::new(0.6, 0.25, 0.05),
        ),
        (
            ModelParams::new(0.99, 1.0, 1.0, 1.0),
            InitialFractions::new(0.99, 0.01, 0.0),
        ),
        (
            ModelParams::new(0.3, 2.0, 1.5, 0.0),
            InitialFractions::new(0.25, 0.6, 0.05),
        ),
    ];
    let mut worst = [0.0_f64; 5];
    let mut report = Vec::new();
    let mut sigma_from_quadrature = true;
    for (params, init) in cases {
        let asym = solve_asymptotics(params, init).map_err(|e| e.to_string())?;
        for t in [0.25, 0.5, 1.0, asym.tau_inf] {
            let (_, _, dev) =
                clt::closed_form_report(params, init, t).map_err(|e| e.to_string())?;
            for (k, (_, d)) in dev.entries().iter().enumerate() {
                worst[k] = worst[k].max(d.abs());
            }
            report.push(dev);
        }
        let f = sigma(params, init, &asym).map_err(|e| e.to_string())?;
        let quad = covariance_quadrature(params, init, asym.tau_inf).map_err(|e| e.to_string())?;
        let s = project_covariance(&quad, f.k1, f.k2);
        sigma_from_quadrature &= f.method == CovarianceMethod::Quadrature
            && f.closed_form_deviation.is_some()
            && (0..2).all(|i| (0..2).all(|j| s[i][j] == f.sigma[i][j]));
    }
    let elapsed = start.elapsed();
    let names = ["c11", "c13", "c22", "c23", "c33"];
    let compared: Vec<String> = (0..4)
        .map(|k| format!("{} {:.2e}", names[k], worst[k]))
        .collect();
    let ok = report.len() == 20
        && worst[..4].iter().all(|w| *w <= CLOSED_FORM_TOL)
        && sigma_from_quadrature
        && elapsed < Duration::from_secs(10);
    check(
        ok,
        format!(
            "20 points, max |closed - quadrature|: {}; c33 reported {:.2e}; sigma from quadrature: {sigma_from_quadrature}; {elapsed:?}",
            compared.join(", "),
            worst[4]
        ),
    )
}

fn random_model<R: Rng>(rng: &mut R) -> (ModelParams, InitialFractions) {
    let theta: f64 = rng.random_range(0.05..0.95);
    let params = ModelParams::new(
        theta,
        rng.random_range(0.1..4.0),
        rng.random_range(0.1..4.0),
        rng.random_range(0.0..=1.0),
    );
    let x10 = theta * rng.random_range(0.01..0.99);
    let y10 = (theta - x10) * rng.random_range(0.0..1.0);
    let x20 = (1.0 - theta) * rng.random_range(0.01..1.0);
    (params, InitialFractions::new(x10, x20, y10))
}

fn random_state<R: Rng>(rng: &mut R) -> PopulationState {
    let n1 = rng.random_range(1..300);
    let n2 = rng.random_range(1..300);
    let a_used = rng.random_range(0..=n1);
    let x1 = rng.random_range(0..=a_used);
    let x2 = rng.random_range(0..=n2);
    PopulationState::from_counts(x1, x2, a_used - x1, n1, n2).unwrap()
}

fn structural_invariants() -> Outcome {
    const CASES: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures: Vec<String> = Vec::new();
    let mut note = |name: &str, ok: bool| {
        if !ok && !failures.iter().any(|f| f == name) {
            failures.push(name.to_string());
        }
    };

    for i in 0..CASES {
        let (params, init) = random_model(&mut rng);
        let n = rng.random_range(1..400);
        let cfg = SimConfig::new(n, i as u64).with_record_mode(RecordMode::EventLog);
        let Ok(rec) = simulate(params, init, cfg) else {
            continue;
        };
        note(
            "conservation",
            rec.states().iter().all(|s| s.x1 + s.x2 + s.y1 + s.z == n),
        );
        note("event count", rec.event_count <= 2 * n);
    }

    for _ in 0..CASES {
        let (params, _) = random_model(&mut rng);
        let s = random_state(&mut rng);
        if s.y1 == 0 {
            note(
                "absorbed rates",
                rates(params, &s).iter().all(|&r| r == 0.0),
            );
            continue;
        }
        let a = normalize_rates(rates(params, &s)).unwrap();
        let b = normalize_rates(time_changed_rates(params, &s)).unwrap();
        note(
            "jump chains",
            (0..4).all(|k| (a[k] - b[k]).abs() <= 4.0 * f64::EPSILON),
        );
    }

    for _ in 0..CASES {
        let (params, _) = random_model(&mut rng);
        let r = rng.random_range(0.0..4.0);
        let s = r + rng.random_range(0.0..4.0);
        let t = s + rng.random_range(0.0..4.0);
        let id = fundamental_matrix(params, t, t).unwrap();
        note("phi(t, t) = I", max_abs_diff3(&id, &IDENTITY3) <= 1e-12);
        let composed = mul3(
            &fundamental_matrix(params, t, s).unwrap(),
            &fundamental_matrix(params, s, r).unwrap(),
        );
        note(
            "semigroup",
            max_abs_diff3(&composed, &fundamental_matrix(params, t, r).unwrap()) <= 1e-12,
        );
        let v = [
            params.theta * rng.random_range(0.0..=1.0),
            (1.0 - params.theta) * rng.random_range(0.0..=1.0),
            0.0,
        ];
        let g = diffusion(params, v);
        note(
            "G psd",
            sym_eigenvalues3(&g)[0] >= -1e-12 * g[2][2].abs().max(1.0),
        );
    }

    for _ in 0..CASES {
        let (params, init) = random_model(&mut rng);
        note(
            "f(x20) = y10",
            f_eval(params, init, init.x20) == Ok(init.y10),
        );
        let asym = match solve_asymptotics(params, init) {
            Ok(a) => a,
            Err(_) => {
                note("solver", false);
                continue;
            }
        };
        let x1 = init.x10 * (asym.x2_inf / init.x20).powf(params.lambda / params.alpha);
        note("x1_inf relation", (asym.x1_inf - x1).abs() <= 1e-12);
        note(
            "tau_inf relation",
            ((-params.lambda * asym.tau_inf).exp() - asym.x1_inf / init.x10).abs() <= 1e-12,
        );
        match sigma(params, init, &asym) {
            Ok(f) => {
                let scale = f.sigma[0][0].abs().max(f.sigma[1][1].abs()).max(1.0);
                note("sigma psd", sym_eigenvalues2(&f.sigma)[0] >= -1e-10 * scale);
            }
            Err(_) => note("sigma", false),
        }
    }

    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(60);
    let detail = if failures.is_empty() {
        format!("{CASES} cases per property, {elapsed:?}")
    } else {
        format!("violated: {}; {elapsed:?}", failures.join(", "))
    };
    check(ok, detail)
}

fn run_cli(args: &[&str], out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_rumor"))
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .expect("spawn rumor");
    assert!(status.success(), "rumor {args:?} exited with {status}");
    std::fs::read(out).expect("read output")
}

fn thread_independence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = [
        "--theta", "0.5", "--lambda", "1", "--alpha", "0.5", "--p", "0.8", "--x10", "0.45",
        "--x20", "0.5", "--y10", "0.05", "--seed", "424242",
    ];
    let commands: [&[&str]; 6] = [
        &[
            "ensemble", "--n", "2000", "--runs", "64", "--format", "json",
        ],
        &["ensemble", "--n", "2000", "--runs", "64", "--format", "csv"],
        &["verify-wlln", "--n", "5000", "--runs", "40"],
        &["verify-clt", "--n", "2000", "--runs", "200"],
        &["simulate", "--n", "500", "--record", "event"],
        &[
            "simulate", "--n", "500", "--record", "sampled", "--dt", "0.0005",
        ],
    ];
    let mut compared = 0;
    for (c, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in ["1", "2", "4", "7"] {
            let mut args: Vec<&str> = cmd.to_vec();
            args.extend_from_slice(&model);
            if !cmd[0].starts_with("simulate") {
                args.extend_from_slice(&["--threads", threads]);
            }
            let out = dir.path().join(format!("{c}-{threads}"));
            outputs.push(run_cli(&args, &out));
        }
        if outputs.iter().any(|o| o != &outputs[0] || o.is_empty()) {
            return Err(format!(
                "`{}` output depends on the worker count",
                cmd.join(" ")
            ));
        }
        compared += outputs.len();
    }
    Ok(format!("{compared} outputs over 6 randomized invocations are byte-identical across 1, 2, 4 and 7 workers"))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("near-basic total ignorant fraction", near_basic_total),
        (
            "closed form vs root solver on equal rates",
            lambert_equivalence,
        ),
        ("ensemble means converge to the limit", law_of_large_numbers),
        ("scaled fluctuations are N(0, sigma)", central_limit),
        (
            "closed-form covariance vs quadrature",
            closed_form_agreement,
        ),
        ("structural invariants", structural_invariants),
        ("determinism across worker counts", thread_independence),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
