//! Deterministic fluid limit of the time-changed chain and the asymptotic
//! final proportions of ignorants.
//!
//! Along the limit path `x1(t) = x10 e^{-lambda t}`, `x2(t) = x20 e^{-alpha t}`
//! and `y1(t) = f(x2(t))`, where
//!
//! ```text
//! f(x) = y10 + (1+p) x10 [1 - (x/x20)^{lambda/alpha}] + (x20 - x)
//!        + ((lambda - alpha) theta + alpha) / alpha * ln(x / x20)
//! ```
//!
//! The final B-ignorant fraction `x2_inf` is the root of `f` in `(0, x20]` on
//! which `f` is non-decreasing; it is where the path first reaches `y1 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{NumericalError, Result};
use crate::model::{self, Density, InitialFractions, ModelParams};
use crate::roots::{brent, RootTolerance};
use crate::special::lambert_w0;

/// Relative gap below which `lambda` and `alpha` are treated as equal.
pub const EQUAL_RATES_TOL: f64 = 1e-12;

fn rates_equal(params: &ModelParams) -> bool {
    (params.lambda - params.alpha).abs() <= EQUAL_RATES_TOL * params.lambda.max(params.alpha)
}

/// Coefficient of the logarithm in `f`.
fn log_coefficient(params: &ModelParams) -> f64 {
    ((params.lambda - params.alpha) * params.theta + params.alpha) / params.alpha
}

fn check_domain(init: &InitialFractions, x: f64) -> Result<(), NumericalError> {
    if x > 0.0 && x <= init.x20 {
        Ok(())
    } else {
        Err(NumericalError::OutsideDomain { x, x20: init.x20 })
    }
}

/// `f(x)` on `(0, x20]`.
pub fn f_eval(params: ModelParams, init: InitialFractions, x: f64) -> Result<f64, NumericalError> {
    check_domain(&init, x)?;
    Ok(f_unchecked(&params, &init, x))
}

fn f_unchecked(params: &ModelParams, init: &InitialFractions, x: f64) -> f64 {
    let u = x / init.x20;
    init.y10
        + (1.0 + params.p) * init.x10 * (1.0 - u.powf(params.rate_ratio()))
        + (init.x20 - x)
        + log_coefficient(params) * u.ln()
}

/// `f'(x)` on `(0, x20]`.
pub fn f_prime(params: ModelParams, init: InitialFractions, x: f64) -> Result<f64, NumericalError> {
    check_domain(&init, x)?;
    Ok(f_prime_unchecked(&params, &init, x))
}

fn f_prime_unchecked(params: &ModelParams, init: &InitialFractions, x: f64) -> f64 {
    let r = params.rate_ratio();
    let u = x / init.x20;
    -(1.0 + params.p) * init.x10 * r * u.powf(r) / x - 1.0 + log_coefficient(params) / x
}

/// `f''(x)` on `(0, x20]`.
pub fn f_second(
    params: ModelParams,
    init: InitialFractions,
    x: f64,
) -> Result<f64, NumericalError> {
    check_domain(&init, x)?;
    let r = params.rate_ratio();
    let u = x / init.x20;
    Ok(
        ((1.0 + params.p) * init.x10 * r * (1.0 - r) * u.powf(r) - log_coefficient(&params))
            / (x * x),
    )
}

/// Closed-form fluid limit path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicPath {
    pub params: ModelParams,
    pub init: InitialFractions,
}

impl DeterministicPath {
    pub fn new(params: ModelParams, init: InitialFractions) -> Self {
        Self { params, init }
    }

    pub fn x1(&self, t: f64) -> f64 {
        self.init.x10 * (-self.params.lambda * t).exp()
    }

    pub fn x2(&self, t: f64) -> f64 {
        self.init.x20 * (-self.params.alpha * t).exp()
    }

    pub fn y1(&self, t: f64) -> f64 {
        let ModelParams {
            theta,
            lambda,
            alpha,
            p,
        } = self.params;
        self.init.y10
            + (1.0 + p) * (self.init.x10 - self.x1(t))
            + (self.init.x20 - self.x2(t))
            + (theta * (alpha - lambda) - alpha) * t
    }

    pub fn eval(&self, t: f64) -> Density {
        [self.x1(t), self.x2(t), self.y1(t)]
    }

    /// `y1'(t) = lambda [(1+p) x1 - theta] - alpha (1 - theta - x2)`.
    pub fn y1_prime(&self, t: f64) -> f64 {
        y1_rate(&self.params, self.x1(t), self.x2(t))
    }
}

fn y1_rate(params: &ModelParams, x1: f64, x2: f64) -> f64 {
    params.lambda * ((1.0 + params.p) * x1 - params.theta)
        - params.alpha * (1.0 - params.theta - x2)
}

pub fn path_eval(path: &DeterministicPath, t: f64) -> Density {
    path.eval(t)
}

pub fn y1_prime_at(params: ModelParams, init: InitialFractions, t: f64) -> f64 {
    DeterministicPath::new(params, init).y1_prime(t)
}

/// Shape quantities of `f` when `lambda < alpha`: the threshold `a` on theta
/// above which `f'(x20) < 0`, the threshold `b` below which the inflection
/// point lies beyond `x20`, and the inflection point `xbar` itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketDiagnostics {
    pub a: f64,
    pub b: f64,
    pub xbar: f64,
}

pub fn bracket_diagnostics(
    params: ModelParams,
    init: InitialFractions,
) -> Option<BracketDiagnostics> {
    if params.lambda >= params.alpha || rates_equal(&params) {
        return None;
    }
    let ModelParams {
        theta,
        lambda,
        alpha,
        p,
    } = params;
    let gap = alpha - lambda;
    let a = (alpha - alpha * init.x20 - lambda * init.x10 * (1.0 + p)) / gap;
    let b = (alpha * alpha - lambda * init.x10 * (1.0 + p) * gap) / (alpha * gap);
    let xbar = init.x20
        * ((alpha + (lambda - alpha) * theta) * alpha / (init.x10 * lambda * gap * (1.0 + p)))
            .powf(alpha / lambda);
    Some(BracketDiagnostics { a, b, xbar })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSolution {
    pub x1_inf: f64,
    pub x2_inf: f64,
    pub tau_inf: f64,
    pub y1_prime_at_tau: f64,
    /// No outbreak: `y10 = 0` and the path starts out absorbing.
    pub degenerate: bool,
    pub diagnostics: Option<BracketDiagnostics>,
}

/// Locates `x2_inf` and derives `x1_inf`, `tau_inf` and `y1'(tau_inf)`.
///
/// `f'` is decreasing on `(0, xbar)` and increasing beyond the inflection
/// point `xbar` (which is infinite unless `lambda < alpha`). So `f` has at
/// most two critical points `m1 < xbar < m2`, is increasing on `(0, m1]` and
/// `[m2, x20]`, and the root sought lies on one of these two pieces. Every
/// candidate bracket is confirmed by sign evaluation before refinement.
pub fn solve_asymptotics(
    params: ModelParams,
    init: InitialFractions,
) -> Result<AsymptoticSolution> {
    let (params, init) = model::validate(params, init)?;
    let diagnostics = bracket_diagnostics(params, init);
    let x20 = init.x20;
    let f = |x: f64| f_unchecked(&params, &init, x);
    let fp = |x: f64| f_prime_unchecked(&params, &init, x);
    let slope_top = fp(x20);

    if init.y10 == 0.0 && slope_top >= 0.0 {
        return Ok(AsymptoticSolution {
            x1_inf: init.x10,
            x2_inf: x20,
            tau_inf: 0.0,
            y1_prime_at_tau: y1_rate(&params, init.x10, init.x20),
            degenerate: true,
            diagnostics,
        });
    }

    // The convex stretch, if any, is [xbar, x20].
    let xbar = match diagnostics {
        Some(d) if d.xbar < x20 => Some(d.xbar),
        _ => None,
    };
    let crit_tol = RootTolerance {
        x: 1e-15,
        f: 0.0,
        max_iter: 500,
    };
    // largest local maximiser of f below x20 (f' crosses zero downwards)
    let local_max = |upper: f64| -> Result<f64, NumericalError> {
        let lower = shrink_until(upper, |x| fp(x) > 0.0)?;
        Ok(brent(fp, lower, upper, crit_tol)?.x)
    };

    let (lo_piece, hi_piece) = match xbar {
        None => {
            if slope_top >= 0.0 {
                (None, x20)
            } else {
                (None, local_max(x20)?)
            }
        }
        Some(xbar) => {
            if fp(xbar) >= 0.0 {
                (None, x20)
            } else {
                let m1 = local_max(xbar)?;
                if slope_top > 0.0 && init.y10 > 0.0 {
                    let m2 = brent(fp, xbar, x20, crit_tol)?.x;
                    if f(m2) <= 0.0 {
                        (Some(m2), x20)
                    } else {
                        (None, m1)
                    }
                } else {
                    (None, m1)
                }
            }
        }
    };

    let lo = match lo_piece {
        Some(m2) => m2,
        None => shrink_until(hi_piece, |x| f(x) < 0.0)?,
    };
    let root = brent(f, lo, hi_piece, RootTolerance::default())?;
    let x2_inf = root.x;
    let x1_inf = init.x10 * (x2_inf / x20).powf(params.rate_ratio());
    let tau_inf = -(x2_inf / x20).ln() / params.alpha;
    Ok(AsymptoticSolution {
        x1_inf,
        x2_inf,
        tau_inf,
        y1_prime_at_tau: y1_rate(&params, x1_inf, x2_inf),
        degenerate: false,
        diagnostics,
    })
}

/// Halves `x` until `pred` holds. `f` tends to `-inf` and `f'` to `+inf` at
/// zero, so this terminates for the predicates used here.
fn shrink_until(start: f64, pred: impl Fn(f64) -> bool) -> Result<f64, NumericalError> {
    let mut x = start;
    for _ in 0..1100 {
        x *= 0.5;
        if pred(x) {
            return Ok(x);
        }
        if x == 0.0 {
            break;
        }
    }
    Err(NumericalError::NoBracket {
        lo: 0.0,
        hi: start,
        flo: f64::NAN,
        fhi: f64::NAN,
    })
}

/// Closed form via the principal branch of Lambert W, valid for
/// `alpha = lambda` and `p = 1`. Returns `(x1_inf, x2_inf)`.
pub fn lambert_solution(params: ModelParams, init: InitialFractions) -> Result<(f64, f64)> {
    let (params, init) = model::validate(params, init)?;
    if !rates_equal(&params) || params.p != 1.0 {
        return Err(NumericalError::LambertNotApplicable {
            alpha: params.alpha,
            lambda: params.lambda,
            p: params.p,
        }
        .into());
    }
    let c = 2.0 * init.x10 + init.x20;
    let w = lambert_w0(-c * (-(init.y10 + c)).exp())?;
    Ok((-init.x10 / c * w, -init.x20 / c * w))
}
