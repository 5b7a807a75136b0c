//! Exact event-driven simulation of the chain until absorption.
//!
//! Direct method: with total rate `R` the waiting time is `Exp(R)` and the
//! transition is drawn with probability `rate_i / R`. The chain only has four
//! channels, so every event costs O(1).

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NumericalError, Result, ValidationError};
use crate::limit::AsymptoticSolution;
use crate::model::{self, InitialFractions, ModelParams, PopulationState, TransitionKind};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    FinalOnly,
    EventLog,
    /// Snapshots at `k * dt`, holding the state constant between events.
    Sampled {
        dt: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: u64,
    pub seed: u64,
    pub record_mode: RecordMode,
}

impl SimConfig {
    pub fn new(n: u64, seed: u64) -> Self {
        Self {
            n,
            seed,
            record_mode: RecordMode::FinalOnly,
        }
    }

    pub fn with_record_mode(mut self, mode: RecordMode) -> Self {
        self.record_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.n == 0 {
            return Err(ValidationError::EmptyPopulation);
        }
        if let RecordMode::Sampled { dt } = self.record_mode {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(ValidationError::BadSamplingStep(dt));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: TransitionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub x1: u64,
    pub x2: u64,
    pub y1: u64,
    pub z: u64,
}

impl Snapshot {
    fn of(t: f64, s: &PopulationState) -> Self {
        Self {
            t,
            x1: s.x1,
            x2: s.x2,
            y1: s.y1,
            z: s.z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub initial_state: PopulationState,
    pub final_state: PopulationState,
    pub absorption_time: f64,
    pub event_count: u64,
    /// Filled in `EventLog` mode.
    pub events: Vec<Event>,
    /// Filled in `Sampled` mode.
    pub samples: Vec<Snapshot>,
}

impl TrajectoryRecord {
    /// Replays the event log from the initial state.
    pub fn states(&self) -> Vec<PopulationState> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut s = self.initial_state;
        out.push(s);
        for e in &self.events {
            s = s.apply(e.kind).expect("logged event must be applicable");
            out.push(s);
        }
        out
    }
}

/// Picks a channel with probability proportional to its rate. `u` in [0, 1).
fn choose(r: &[f64; 4], total: f64, u: f64) -> TransitionKind {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &ri) in r.iter().enumerate() {
        if ri > 0.0 {
            acc += ri;
            last_positive = i;
            if target < acc {
                return TransitionKind::ALL[i];
            }
        }
    }
    // rounding can leave target == acc
    TransitionKind::ALL[last_positive]
}

/// Runs the chain from `start` until no spreaders remain.
pub fn simulate_from_state<R: Rng + ?Sized>(
    params: ModelParams,
    start: PopulationState,
    mode: RecordMode,
    rng: &mut R,
) -> TrajectoryRecord {
    let mut s = start;
    let mut t = 0.0_f64;
    let mut count = 0_u64;
    let mut events = Vec::new();
    let mut samples = Vec::new();
    let mut next_sample = 0_u64;
    if matches!(mode, RecordMode::EventLog) {
        events.reserve(2 * start.n as usize);
    }

    while !s.is_absorbed() {
        // same jump chain as the original rates, whose total is Y1 times this one
        let r = model::time_changed_rates(params, &s);
        let tc_total: f64 = r.iter().sum();
        let total = tc_total * s.y1 as f64;
        let e: f64 = rng.sample(Open01);
        let dt = -e.ln() / total;
        let kind = choose(&r, tc_total, rng.random::<f64>());
        let t_next = t + dt;

        if let RecordMode::Sampled { dt: step } = mode {
            loop {
                let grid = next_sample as f64 * step;
                if grid >= t_next {
                    break;
                }
                samples.push(Snapshot::of(grid, &s));
                next_sample += 1;
            }
        }

        t = t_next;
        s = s
            .apply(kind)
            .expect("a channel with positive rate keeps counts non-negative");
        count += 1;
        if let RecordMode::EventLog = mode {
            events.push(Event { time: t, kind });
        }
    }

    if let RecordMode::Sampled { dt: step } = mode {
        // grid points up to and including the first one at or after absorption
        loop {
            let grid = next_sample as f64 * step;
            samples.push(Snapshot::of(grid, &s));
            next_sample += 1;
            if grid >= t {
                break;
            }
        }
    }

    TrajectoryRecord {
        initial_state: start,
        final_state: s,
        absorption_time: t,
        event_count: count,
        events,
        samples,
    }
}

/// Simulates one realisation. Uses the stream of ensemble run 0.
pub fn simulate(
    params: ModelParams,
    init: InitialFractions,
    cfg: SimConfig,
) -> Result<TrajectoryRecord> {
    let (params, init) = model::validate(params, init)?;
    cfg.validate()?;
    let start = model::discretize(params, init, cfg.n)?;
    let mut rng = rng::run_rng(cfg.seed, 0);
    Ok(simulate_from_state(
        params,
        start,
        cfg.record_mode,
        &mut rng,
    ))
}

/// Outcome of a single ensemble member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub final_state: PopulationState,
    pub tau: f64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub m: u64,
    pub n: u64,
    pub seed: u64,
    pub mean_x1_frac: f64,
    pub mean_x2_frac: f64,
    /// Sample covariance of `(X1(tau)/N, X2(tau)/N)`.
    pub cov: [[f64; 2]; 2],
    pub tau_mean: f64,
    pub tau_var: f64,
    pub events_mean: f64,
    pub events_var: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunOutcome>,
}

impl EnsembleSummary {
    /// Reduces run outcomes, in index order, to summary statistics.
    pub fn from_runs(n: u64, seed: u64, runs: Vec<RunOutcome>) -> Self {
        let m = runs.len();
        let nf = n as f64;
        let a: Vec<f64> = runs.iter().map(|r| r.final_state.x1 as f64 / nf).collect();
        let b: Vec<f64> = runs.iter().map(|r| r.final_state.x2 as f64 / nf).collect();
        let tau: Vec<f64> = runs.iter().map(|r| r.tau).collect();
        let ev: Vec<f64> = runs.iter().map(|r| r.events as f64).collect();
        let (ma, mb) = (mean(&a), mean(&b));
        let c_ab = covariance(&a, ma, &b, mb);
        Self {
            m: m as u64,
            n,
            seed,
            mean_x1_frac: ma,
            mean_x2_frac: mb,
            cov: [
                [covariance(&a, ma, &a, ma), c_ab],
                [c_ab, covariance(&b, mb, &b, mb)],
            ],
            tau_mean: mean(&tau),
            tau_var: covariance(&tau, mean(&tau), &tau, mean(&tau)),
            events_mean: mean(&ev),
            events_var: covariance(&ev, mean(&ev), &ev, mean(&ev)),
            runs,
        }
    }

    /// Copy without the per-run records.
    pub fn without_runs(&self) -> Self {
        Self {
            runs: Vec::new(),
            ..self.clone()
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample covariance; zero for fewer than two samples.
fn covariance(a: &[f64], ma: f64, b: &[f64], mb: f64) -> f64 {
    if a.len() < 2 {
        return 0.0;
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    s / (a.len() - 1) as f64
}

fn run_one(params: ModelParams, start: PopulationState, seed: u64, i: u64) -> RunOutcome {
    let mut rng = rng::run_rng(seed, i);
    let rec = simulate_from_state(params, start, RecordMode::FinalOnly, &mut rng);
    RunOutcome {
        final_state: rec.final_state,
        tau: rec.absorption_time,
        events: rec.event_count,
    }
}

/// Runs `m` independent realisations on the global rayon pool.
///
/// Results depend only on `(params, init, cfg.n, cfg.seed, m)`: each run owns
/// its seed and outcomes are reduced in run-index order.
pub fn run_ensemble(
    params: ModelParams,
    init: InitialFractions,
    cfg: SimConfig,
    m: u64,
) -> Result<EnsembleSummary> {
    let (params, init) = model::validate(params, init)?;
    cfg.validate()?;
    let start = model::discretize(params, init, cfg.n)?;
    let runs: Vec<RunOutcome> = (0..m.max(1))
        .into_par_iter()
        .map(|i| run_one(params, start, cfg.seed, i))
        .collect();
    Ok(EnsembleSummary::from_runs(cfg.n, cfg.seed, runs))
}

/// As [`run_ensemble`], on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers(
    params: ModelParams,
    init: InitialFractions,
    cfg: SimConfig,
    m: u64,
    workers: usize,
) -> Result<EnsembleSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool construction");
    pool.install(|| run_ensemble(params, init, cfg, m))
}

/// Per-run `sqrt(N) * (X1(tau)/N - x1_inf, X2(tau)/N - x2_inf)`.
pub fn scaled_fluctuations(
    summary: &EnsembleSummary,
    asym: &AsymptoticSolution,
) -> Result<Vec<[f64; 2]>, NumericalError> {
    if summary.runs.is_empty() {
        return Err(NumericalError::MissingRunData);
    }
    let nf = summary.n as f64;
    let root_n = nf.sqrt();
    Ok(summary
        .runs
        .iter()
        .map(|r| {
            [
                root_n * (r.final_state.x1 as f64 / nf - asym.x1_inf),
                root_n * (r.final_state.x2 as f64 / nf - asym.x2_inf),
            ]
        })
        .collect())
}
