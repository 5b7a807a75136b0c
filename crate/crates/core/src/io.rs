//! Text formats for trajectories, fluid-limit paths and parameter sweeps.
//!
//! Floating-point fields are written with 17 significant digits, which is
//! enough for every `f64` to parse back to the same bits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::clt::{self, FluctuationResult};
use crate::error::Result;
use crate::limit::{self, AsymptoticSolution, DeterministicPath};
use crate::model::{InitialFractions, ModelParams, TransitionKind};
use crate::ssa::TrajectoryRecord;

pub const EVENT_HEADER: &str = "t,kind,x1,x2,y1,z";
pub const SAMPLED_HEADER: &str = "t,x1,x2,y1,z";
pub const ODE_HEADER: &str = "t,x1,x2,y1";
pub const SWEEP_HEADER: &str =
    "theta,lambda,alpha,p,x10,x20,y10,x1_inf,x2_inf,tau_inf,s11,s12,s22,degenerate";
pub const RUNS_HEADER: &str = "run,x1,x2,y1,z,tau,events";

/// Label of the initial row in event-mode trajectory files.
pub const INITIAL_KIND: &str = "init";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Event-mode trajectory: the initial state at `t = 0`, then one row per event.
pub fn event_csv(rec: &TrajectoryRecord) -> String {
    let mut out = String::new();
    out.push_str(EVENT_HEADER);
    out.push('\n');
    let states = rec.states();
    let s0 = states[0];
    writeln!(
        out,
        "{},{INITIAL_KIND},{},{},{},{}",
        fmt_f64(0.0),
        s0.x1,
        s0.x2,
        s0.y1,
        s0.z
    )
    .unwrap();
    for (e, s) in rec.events.iter().zip(&states[1..]) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(e.time),
            e.kind.label(),
            s.x1,
            s.x2,
            s.y1,
            s.z
        )
        .unwrap();
    }
    out
}

pub fn sampled_csv(rec: &TrajectoryRecord) -> String {
    let mut out = String::new();
    out.push_str(SAMPLED_HEADER);
    out.push('\n');
    for s in &rec.samples {
        writeln!(out, "{},{},{},{},{}", fmt_f64(s.t), s.x1, s.x2, s.y1, s.z).unwrap();
    }
    out
}

/// One parsed row of an event-mode trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRow {
    pub t: f64,
    /// `None` for the initial row.
    pub kind: Option<TransitionKind>,
    pub x1: u64,
    pub x2: u64,
    pub y1: u64,
    pub z: u64,
}

pub fn parse_event_csv(text: &str) -> Option<Vec<EventRow>> {
    let mut lines = text.lines();
    if lines.next()? != EVENT_HEADER {
        return None;
    }
    lines
        .map(|line| {
            let mut it = line.split(',');
            let t = it.next()?.parse().ok()?;
            let kind = match it.next()? {
                INITIAL_KIND => None,
                label => Some(TransitionKind::from_label(label)?),
            };
            let mut n = || it.next()?.parse::<u64>().ok();
            Some(EventRow {
                t,
                kind,
                x1: n()?,
                x2: n()?,
                y1: n()?,
                z: n()?,
            })
        })
        .collect()
}

/// Fluid-limit path on the uniform grid `t_k = k * tmax / steps`.
pub fn ode_csv(path: &DeterministicPath, tmax: f64, steps: usize) -> String {
    let mut out = String::new();
    out.push_str(ODE_HEADER);
    out.push('\n');
    let steps = steps.max(1);
    for k in 0..=steps {
        let t = tmax * k as f64 / steps as f64;
        let [x1, x2, y1] = path.eval(t);
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(t),
            fmt_f64(x1),
            fmt_f64(x2),
            fmt_f64(y1)
        )
        .unwrap();
    }
    out
}

pub fn parse_f64_rows(text: &str, header: &str) -> Option<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    if lines.next()? != header {
        return None;
    }
    lines
        .map(|l| l.split(',').map(|v| v.parse().ok()).collect())
        .collect()
}

/// One grid point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: ModelParams,
    pub init: InitialFractions,
    pub asym: AsymptoticSolution,
    pub fluct: FluctuationResult,
}

impl SweepRow {
    pub fn compute(params: ModelParams, init: InitialFractions) -> Result<Self> {
        let asym = limit::solve_asymptotics(params, init)?;
        let fluct = clt::sigma(params, init, &asym)?;
        Ok(Self {
            params,
            init,
            asym,
            fluct,
        })
    }

    pub fn csv_line(&self) -> String {
        let p = &self.params;
        let i = &self.init;
        let s = &self.fluct.sigma;
        [
            p.theta,
            p.lambda,
            p.alpha,
            p.p,
            i.x10,
            i.x20,
            i.y10,
            self.asym.x1_inf,
            self.asym.x2_inf,
            self.asym.tau_inf,
            s[0][0],
            s[0][1],
            s[1][1],
        ]
        .iter()
        .map(|v| fmt_f64(*v))
        .chain(std::iter::once(self.asym.degenerate.to_string()))
        .collect::<Vec<_>>()
        .join(",")
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}
