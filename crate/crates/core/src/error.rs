use thiserror::Error;

/// Input validation failures for parameters, initial fractions and states.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("rate `{name}` must be finite and > 0, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("`{name}` must lie in [0, 1], got {value}")]
    OutOfUnitInterval { name: &'static str, value: f64 },
    #[error("`{name}` must be > 0, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("initial fractions sum to {sum}, expected 1")]
    FractionSum { sum: f64 },
    #[error("group A holds x10 + y10 = {required} but theta = {theta}")]
    GroupAOverflow { required: f64, theta: f64 },
    #[error("group B holds x20 = {required} but 1 - theta = {capacity}")]
    GroupBOverflow { required: f64, capacity: f64 },
    #[error("population size must be >= 1")]
    EmptyPopulation,
    #[error("cannot round fractions to counts for n = {n}: {reason}")]
    Discretization { n: u64, reason: String },
    #[error("inconsistent population state: {0}")]
    InconsistentState(String),
    #[error("sampling step must be finite and > 0, got {0}")]
    BadSamplingStep(f64),
}

/// Failures of the numerical layers (root finding, quadrature, statistics).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericalError {
    #[error("argument {0} is outside the domain of W0 (x >= -1/e)")]
    LambertDomain(f64),
    #[error("closed form requires alpha == lambda and p == 1 (alpha = {alpha}, lambda = {lambda}, p = {p})")]
    LambertNotApplicable { alpha: f64, lambda: f64, p: f64 },
    #[error("x = {x} is outside (0, x20 = {x20}]")]
    OutsideDomain { x: f64, x20: f64 },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {flo}, f(hi) = {fhi}")]
    NoBracket {
        lo: f64,
        hi: f64,
        flo: f64,
        fhi: f64,
    },
    #[error(
        "root refinement did not converge after {iterations} iterations (bracket [{lo}, {hi}])"
    )]
    RootNotConverged { iterations: usize, lo: f64, hi: f64 },
    #[error("quadrature did not reach tolerance {tol:e} within {max_intervals} intervals (error estimate {estimate:e})")]
    QuadratureNotConverged {
        tol: f64,
        max_intervals: usize,
        estimate: f64,
    },
    #[error("time arguments must satisfy t >= s >= 0 (t = {t}, s = {s})")]
    TimeOrder { t: f64, s: f64 },
    #[error("covariance matrix is singular (determinant {0:e})")]
    SingularCovariance(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("state is absorbed (no spreaders), no jump is possible")]
    Absorbed,
    #[error("ensemble summary does not retain per-run final states")]
    MissingRunData,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
