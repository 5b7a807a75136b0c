//! Two-group Maki-Thompson rumor model with directed inter-group contacts.
//!
//! A population of `N` splits into group A (share `theta`) and group B.
//! A-spreaders contact A-individuals at rate `lambda` and B-individuals at
//! rate `alpha`. A contacted A-ignorant becomes a spreader with probability
//! `p` (a stifler otherwise); a contacted B-ignorant becomes a stifler; a
//! spreader that contacts anyone already informed becomes a stifler.
//!
//! The crate provides
//!
//! * [`model`]: parameters, states, rates and the embedded jump chain;
//! * [`ssa`]: exact simulation and reproducible parallel ensembles;
//! * [`limit`]: the fluid limit and the asymptotic ignorant fractions;
//! * [`clt`]: the limiting covariance of the scaled final fractions;
//! * [`gof`]: a goodness-of-fit test of simulated fluctuations.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clt;
pub mod error;
pub mod gof;
pub mod io;
pub mod limit;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;
pub mod ssa;

pub use clt::{sigma, CovarianceMethod, FluctuationResult};
pub use error::{Error, NumericalError, Result, ValidationError};
pub use gof::{gof_test, GofReport};
pub use limit::{lambert_solution, solve_asymptotics, AsymptoticSolution, DeterministicPath};
pub use model::{
    discretize, validate, InitialFractions, ModelParams, PopulationState, TransitionKind,
};
pub use special::lambert_w0;
pub use ssa::{
    run_ensemble, run_ensemble_with_workers, scaled_fluctuations, simulate, EnsembleSummary,
    RecordMode, SimConfig, TrajectoryRecord,
};
