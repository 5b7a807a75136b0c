//! Parameters, population states and transition rates of the two-group chain.
//!
//! The chain tracks `(X1, X2, Y1)`: A-ignorants, B-ignorants and A-spreaders.
//! Stiflers `Z` are stored alongside so that conservation can be checked on
//! every update. Two rate families share the same four transitions:
//!
//! * the original chain, whose rates all carry the factor `Y1`;
//! * the time-changed chain (clock run at rate `1/Y1`), a density dependent
//!   family with rates `N * beta(state / N)`.
//!
//! Because the factor `Y1` is common to all four original rates, both chains
//! have the same jump chain and therefore the same absorption state.

use serde::{Deserialize, Serialize};

use crate::error::{NumericalError, ValidationError};

/// Absolute slack allowed when checking that fractions sum to one and fit
/// inside their groups.
pub const FRACTION_TOL: f64 = 1e-12;

/// Densities `(x1, x2, y1)` of the scaled chain.
pub type Density = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Share of the population in group A.
    pub theta: f64,
    /// Contact rate of an A-spreader with A-individuals.
    pub lambda: f64,
    /// Contact rate of an A-spreader with B-individuals.
    pub alpha: f64,
    /// Probability that a contacted A-ignorant becomes a spreader.
    pub p: f64,
}

impl ModelParams {
    pub fn new(theta: f64, lambda: f64, alpha: f64, p: f64) -> Self {
        Self {
            theta,
            lambda,
            alpha,
            p,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        for (name, value) in [("lambda", self.lambda), ("alpha", self.alpha)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ValidationError::NonPositiveRate { name, value });
            }
        }
        for (name, value) in [("theta", self.theta), ("p", self.p)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ValidationError::OutOfUnitInterval { name, value });
            }
        }
        Ok(())
    }

    /// `lambda / alpha`, the exponent linking the two ignorant classes.
    pub fn rate_ratio(&self) -> f64 {
        self.lambda / self.alpha
    }
}

/// Limiting initial fractions of A-ignorants, B-ignorants, A-spreaders and
/// stiflers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialFractions {
    pub x10: f64,
    pub x20: f64,
    pub y10: f64,
    pub z0: f64,
}

impl InitialFractions {
    /// Builds the fractions with `z0 = 1 - x10 - x20 - y10`.
    pub fn new(x10: f64, x20: f64, y10: f64) -> Self {
        Self {
            x10,
            x20,
            y10,
            z0: 1.0 - x10 - x20 - y10,
        }
    }

    pub fn with_z0(x10: f64, x20: f64, y10: f64, z0: f64) -> Self {
        Self { x10, x20, y10, z0 }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        for (name, value) in [("x10", self.x10), ("x20", self.x20)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ValidationError::NotPositive { name, value });
            }
        }
        for (name, value) in [
            ("x10", self.x10),
            ("x20", self.x20),
            ("y10", self.y10),
            ("z0", self.z0),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ValidationError::OutOfUnitInterval { name, value });
            }
        }
        let sum = self.x10 + self.x20 + self.y10 + self.z0;
        if (sum - 1.0).abs() > FRACTION_TOL {
            return Err(ValidationError::FractionSum { sum });
        }
        Ok(())
    }

    /// Initial densities `(x10, x20, y10)`.
    pub fn density(&self) -> Density {
        [self.x10, self.x20, self.y10]
    }
}

/// Checks both inputs and their group-membership consistency.
pub fn validate(
    params: ModelParams,
    init: InitialFractions,
) -> Result<(ModelParams, InitialFractions), ValidationError> {
    params.validate()?;
    init.validate()?;
    let in_a = init.x10 + init.y10;
    if in_a > params.theta + FRACTION_TOL {
        return Err(ValidationError::GroupAOverflow {
            required: in_a,
            theta: params.theta,
        });
    }
    let capacity = 1.0 - params.theta;
    if init.x20 > capacity + FRACTION_TOL {
        return Err(ValidationError::GroupBOverflow {
            required: init.x20,
            capacity,
        });
    }
    Ok((params, init))
}

/// The four transitions acting on `(X1, X2, Y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// A-ignorant told the rumor becomes a spreader: `(-1, 0, +1)`.
    Spread,
    /// B-ignorant contacted, becomes a stifler: `(0, -1, 0)`.
    InformB,
    /// Spreader meets someone who already knows and stops: `(0, 0, -1)`.
    Stifle,
    /// A-ignorant told the rumor becomes a stifler directly: `(-1, 0, 0)`.
    InformAStifler,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 4] = [
        TransitionKind::Spread,
        TransitionKind::InformB,
        TransitionKind::Stifle,
        TransitionKind::InformAStifler,
    ];

    pub fn index(self) -> usize {
        match self {
            TransitionKind::Spread => 0,
            TransitionKind::InformB => 1,
            TransitionKind::Stifle => 2,
            TransitionKind::InformAStifler => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Increment vector on `(X1, X2, Y1)`.
    pub fn increment(self) -> [i64; 3] {
        match self {
            TransitionKind::Spread => [-1, 0, 1],
            TransitionKind::InformB => [0, -1, 0],
            TransitionKind::Stifle => [0, 0, -1],
            TransitionKind::InformAStifler => [-1, 0, 0],
        }
    }

    /// Short label used in trajectory files (`l1`..`l4`).
    pub fn label(self) -> &'static str {
        match self {
            TransitionKind::Spread => "l1",
            TransitionKind::InformB => "l2",
            TransitionKind::Stifle => "l3",
            TransitionKind::InformAStifler => "l4",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }
}

/// Integer counts of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PopulationState {
    pub x1: u64,
    pub x2: u64,
    pub y1: u64,
    pub z: u64,
    pub n: u64,
    pub n1: u64,
    pub n2: u64,
}

impl PopulationState {
    /// Builds a state from `(X1, X2, Y1)` and the group sizes, deriving `Z`.
    pub fn from_counts(
        x1: u64,
        x2: u64,
        y1: u64,
        n1: u64,
        n2: u64,
    ) -> Result<Self, ValidationError> {
        let n = n1 + n2;
        let z = n.checked_sub(x1 + x2 + y1).ok_or_else(|| {
            ValidationError::InconsistentState(format!(
                "x1 + x2 + y1 = {} exceeds n = {n}",
                x1 + x2 + y1
            ))
        })?;
        let s = Self {
            x1,
            x2,
            y1,
            z,
            n,
            n1,
            n2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let bad = |msg: String| Err(ValidationError::InconsistentState(msg));
        if self.x1 + self.x2 + self.y1 + self.z != self.n {
            return bad(format!("x1 + x2 + y1 + z != n in {self:?}"));
        }
        if self.n1 + self.n2 != self.n {
            return bad(format!("n1 + n2 != n in {self:?}"));
        }
        if self.x1 + self.y1 > self.n1 {
            return bad(format!("x1 + y1 > n1 in {self:?}"));
        }
        if self.x2 > self.n2 {
            return bad(format!("x2 > n2 in {self:?}"));
        }
        Ok(())
    }

    pub fn is_absorbed(&self) -> bool {
        self.y1 == 0
    }

    /// `2 X1 + X2 + Y1`; drops by at least one at every transition.
    pub fn potential(&self) -> u64 {
        2 * self.x1 + self.x2 + self.y1
    }

    /// Applies a transition. Returns `None` when a count would go negative.
    pub fn apply(&self, kind: TransitionKind) -> Option<Self> {
        let mut s = *self;
        match kind {
            TransitionKind::Spread => {
                s.x1 = s.x1.checked_sub(1)?;
                s.y1 += 1;
            }
            TransitionKind::InformB => {
                s.x2 = s.x2.checked_sub(1)?;
                s.z += 1;
            }
            TransitionKind::Stifle => {
                s.y1 = s.y1.checked_sub(1)?;
                s.z += 1;
            }
            TransitionKind::InformAStifler => {
                s.x1 = s.x1.checked_sub(1)?;
                s.z += 1;
            }
        }
        Some(s)
    }

    /// Densities `(X1/N, X2/N, Y1/N)`.
    pub fn density(&self) -> Density {
        let n = self.n as f64;
        [self.x1 as f64 / n, self.x2 as f64 / n, self.y1 as f64 / n]
    }
}

/// Largest-remainder rounding of `weights * total`; ties go to the earlier
/// entry. The result always sums to `total`.
fn largest_remainder<const K: usize>(weights: [f64; K], total: u64) -> [u64; K] {
    let scaled = weights.map(|w| w.max(0.0) * total as f64);
    let mut counts = scaled.map(|v| v.floor() as u64);
    let mut order: [usize; K] = std::array::from_fn(|i| i);
    // stable sort keeps declaration order among equal remainders
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra)
    });
    let assigned: u64 = counts.iter().sum();
    if assigned <= total {
        let mut left = total - assigned;
        let mut i = 0;
        while left > 0 {
            counts[order[i % K]] += 1;
            left -= 1;
            i += 1;
        }
    } else {
        let mut excess = assigned - total;
        for &i in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
    }
    counts
}

/// Rounds the initial fractions to integer counts for a population of `n`.
pub fn discretize(
    params: ModelParams,
    init: InitialFractions,
    n: u64,
) -> Result<PopulationState, ValidationError> {
    if n == 0 {
        return Err(ValidationError::EmptyPopulation);
    }
    let [x1, x2, y1, z] = largest_remainder([init.x10, init.x20, init.y10, init.z0], n);
    let [n1, n2] = largest_remainder([params.theta, 1.0 - params.theta], n);
    let s = PopulationState {
        x1,
        x2,
        y1,
        z,
        n,
        n1,
        n2,
    };
    s.validate().map_err(|e| ValidationError::Discretization {
        n,
        reason: e.to_string(),
    })?;
    if init.x10 > 0.0 && x1 == 0 || init.x20 > 0.0 && x2 == 0 {
        return Err(ValidationError::Discretization {
            n,
            reason: "a positive ignorant fraction rounds to zero individuals".into(),
        });
    }
    Ok(s)
}

/// Rates of the time-changed chain: the original rates divided by `Y1`.
pub fn time_changed_rates(params: ModelParams, s: &PopulationState) -> [f64; 4] {
    let ModelParams {
        lambda, alpha, p, ..
    } = params;
    let x1 = s.x1 as f64;
    let x2 = s.x2 as f64;
    let informed_a = (s.n1 - s.x1) as f64;
    let informed_b = (s.n2 - s.x2) as f64;
    [
        lambda * p * x1,
        alpha * x2,
        alpha * informed_b + lambda * informed_a,
        lambda * (1.0 - p) * x1,
    ]
}

/// Transition rates of the original chain.
pub fn rates(params: ModelParams, s: &PopulationState) -> [f64; 4] {
    let y1 = s.y1 as f64;
    let ModelParams {
        lambda, alpha, p, ..
    } = params;
    let x1 = s.x1 as f64;
    let x2 = s.x2 as f64;
    let informed_a = (s.n1 - s.x1) as f64;
    let informed_b = (s.n2 - s.x2) as f64;
    [
        lambda * p * x1 * y1,
        alpha * y1 * x2,
        alpha * y1 * informed_b + lambda * y1 * informed_a,
        lambda * (1.0 - p) * x1 * y1,
    ]
}

/// Rate densities `beta_l(x1, x2, y1)` of the time-changed family.
pub fn beta(params: ModelParams, v: Density) -> [f64; 4] {
    let ModelParams {
        theta,
        lambda,
        alpha,
        p,
    } = params;
    let [x1, x2, _] = v;
    [
        lambda * p * x1,
        alpha * x2,
        alpha * (1.0 - theta - x2) + lambda * (theta - x1),
        lambda * (1.0 - p) * x1,
    ]
}

/// Normalises a rate vector into jump probabilities.
pub fn normalize_rates(r: [f64; 4]) -> Result<[f64; 4], NumericalError> {
    let total: f64 = r.iter().sum();
    if total <= 0.0 {
        return Err(NumericalError::Absorbed);
    }
    Ok(r.map(|v| v / total))
}

/// Jump-chain probabilities at `s`. Computed from the time-changed rates, in
/// which the common factor `Y1` has already cancelled.
pub fn jump_probabilities(
    params: ModelParams,
    s: &PopulationState,
) -> Result<[f64; 4], NumericalError> {
    if s.is_absorbed() {
        return Err(NumericalError::Absorbed);
    }
    normalize_rates(time_changed_rates(params, s))
}
