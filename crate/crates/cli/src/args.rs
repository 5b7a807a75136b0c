use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rumor_core::{InitialFractions, ModelParams};

#[derive(Debug, Parser)]
#[command(
    name = "rumor",
    version,
    about = "Two-group rumor model: simulation, limits and fluctuations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory of the Markov chain.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// What to record along the trajectory.
        #[arg(long, value_enum, default_value_t = Record::Final)]
        record: Record,
        /// Sampling step for `--record sampled`.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run an ensemble of independent trajectories.
    Ensemble {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        ens: EnsembleArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Asymptotic ignorant fractions of the fluid limit.
    Limit {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Limiting covariance of the scaled final ignorant fractions.
    Clt {
        #[command(flatten)]
        model: ModelArgs,
        /// Source of the covariance of the fluctuation process.
        #[arg(long, value_enum, default_value_t = Method::Quadrature)]
        method: Method,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Fluid-limit path on a uniform time grid.
    Ode {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare ensemble means with the asymptotic fractions.
    VerifyWlln {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        ens: EnsembleArgs,
        /// Absolute tolerance on each mean final fraction.
        #[arg(long, default_value_t = 0.005)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Test simulated fluctuations against the limiting normal law.
    VerifyClt {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        ens: EnsembleArgs,
        /// Relative tolerance on covariance entries.
        #[arg(long, default_value_t = 0.15)]
        cov_rel_tol: f64,
        /// Entries with |sigma_ij| at or below this are not compared.
        #[arg(long, default_value_t = 0.01)]
        cov_min: f64,
        /// Allowed distance of each mean from 0, in standard errors.
        #[arg(long, default_value_t = 3.0)]
        mean_se: f64,
        /// Minimum goodness-of-fit p-value.
        #[arg(long, default_value_t = 0.01)]
        min_p_value: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Asymptotics and covariance over a cartesian parameter grid.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// `name=v1,v2,...` for one of theta, lambda, alpha, p, x10, x20, y10.
        #[arg(long, value_parser = parse_grid)]
        grid: Vec<GridAxis>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Share of group A in the population.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Contact rate of a spreader with group A.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Contact rate of a spreader with group B.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Probability that a contacted A-ignorant starts spreading.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub x10: Option<f64>,
    #[arg(long)]
    pub x20: Option<f64>,
    #[arg(long)]
    pub y10: Option<f64>,
    /// Initial stifler fraction; defaults to 1 - x10 - x20 - y10.
    #[arg(long)]
    pub z0: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SimArgs {
    /// Population size.
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    /// Master seed; generated and reported when absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct EnsembleArgs {
    /// Number of independent runs.
    #[arg(long, default_value_t = 200)]
    pub runs: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, visible_alias = "workers")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Record {
    Final,
    Event,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridParam {
    Theta,
    Lambda,
    Alpha,
    P,
    X10,
    X20,
    Y10,
}

impl GridParam {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "theta" => Self::Theta,
            "lambda" => Self::Lambda,
            "alpha" => Self::Alpha,
            "p" => Self::P,
            "x10" => Self::X10,
            "x20" => Self::X20,
            "y10" => Self::Y10,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub param: GridParam,
    pub values: Vec<f64>,
}

fn parse_grid(s: &str) -> Result<GridAxis, String> {
    let (name, list) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=v1,v2,..., got `{s}`"))?;
    let param = GridParam::from_name(name.trim())
        .ok_or_else(|| format!("unknown grid parameter `{name}`"))?;
    let values = list
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad value `{v}`: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridAxis { param, values })
}

/// Flag values with every field present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelValues {
    pub theta: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub p: f64,
    pub x10: f64,
    pub x20: f64,
    pub y10: f64,
    pub z0: Option<f64>,
}

impl ModelValues {
    pub fn set(&mut self, param: GridParam, v: f64) {
        match param {
            GridParam::Theta => self.theta = v,
            GridParam::Lambda => self.lambda = v,
            GridParam::Alpha => self.alpha = v,
            GridParam::P => self.p = v,
            GridParam::X10 => self.x10 = v,
            GridParam::X20 => self.x20 = v,
            GridParam::Y10 => self.y10 = v,
        }
    }

    pub fn model(&self) -> (ModelParams, InitialFractions) {
        let params = ModelParams::new(self.theta, self.lambda, self.alpha, self.p);
        let init = match self.z0 {
            Some(z0) => InitialFractions::with_z0(self.x10, self.x20, self.y10, z0),
            None => InitialFractions::new(self.x10, self.x20, self.y10),
        };
        (params, init)
    }
}

impl ModelArgs {
    /// Fills in the fields, taking the ones in `provided` as given even if
    /// their flag is absent. Returns the names of missing flags otherwise.
    pub fn values(&self, provided: &[GridParam]) -> Result<ModelValues, Vec<&'static str>> {
        let mut missing = Vec::new();
        let mut get = |v: Option<f64>, param: GridParam, name: &'static str| match v {
            Some(v) => v,
            None if provided.contains(&param) => f64::NAN,
            None => {
                missing.push(name);
                f64::NAN
            }
        };
        let out = ModelValues {
            theta: get(self.theta, GridParam::Theta, "--theta"),
            lambda: get(self.lambda, GridParam::Lambda, "--lambda"),
            alpha: get(self.alpha, GridParam::Alpha, "--alpha"),
            p: get(self.p, GridParam::P, "--p"),
            x10: get(self.x10, GridParam::X10, "--x10"),
            x20: get(self.x20, GridParam::X20, "--x20"),
            y10: get(self.y10, GridParam::Y10, "--y10"),
            z0: self.z0,
        };
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(missing)
        }
    }
}

/// Every point of the cartesian product of `axes`, first axis outermost.
pub fn grid_points(base: ModelValues, axes: &[GridAxis]) -> Vec<ModelValues> {
    let mut points = vec![base];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|pt| {
                axis.values.iter().map(move |&v| {
                    let mut q = pt;
                    q.set(axis.param, v);
                    q
                })
            })
            .collect();
    }
    points
}
