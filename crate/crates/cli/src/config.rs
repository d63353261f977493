use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fracld::{CovKind, ModelParams};

use crate::CliError;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Parser)]
#[command(
    name = "fracld",
    version,
    about = "Local times and large deviations of fractional Brownian motion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Unset numeric controls fall back to
/// per-subcommand defaults.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Hurst index.
    #[arg(long = "H")]
    pub h: Option<f64>,
    /// Spatial dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of independent processes (intersection quantities).
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of grid steps.
    #[arg(long)]
    pub n: Option<usize>,
    /// Time horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Gaussian kernel variance; defaults to a grid-dependent value.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long = "m-max")]
    pub m_max: Option<usize>,
    /// Monte Carlo samples per moment estimate.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    /// Binary path container (`simulate` only).
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Fbm,
    Rl,
    Remainder,
    FbmScaled,
}

impl From<ModelArg> for CovKind {
    fn from(m: ModelArg) -> CovKind {
        match m {
            ModelArg::Fbm => CovKind::Fbm,
            ModelArg::Rl => CovKind::Rl,
            ModelArg::Remainder => CovKind::Remainder,
            ModelArg::FbmScaled => CovKind::FbmScaled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RkhsMode {
    /// Norm of a function read from `--input`.
    Norm,
    /// Build `Z_a` from one sampled remainder path.
    Za,
    /// Estimate `K_a = E exp(-½‖Z_a‖²)`.
    Ka,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample paths on a uniform grid.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "fbm")]
        model: ModelArg,
    },
    /// Smoothed local time at a point for independent replicas.
    Localtime {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "fbm")]
        model: ModelArg,
        /// Evaluation point; one value per coordinate, zero by default.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Levels for the empirical tail curve.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<f64>,
    },
    /// Mutual intersection local time of p independent processes on [0,T]^p.
    Intersect {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "rl")]
        model: ModelArg,
    },
    /// Moments of local time at unit and exponential time, and the
    /// estimate of L and θ they give.
    Moments {
        #[command(flatten)]
        common: Common,
    },
    /// Table of constants and bounds for (H, d, p).
    Constants {
        #[command(flatten)]
        common: Common,
    },
    /// RKHS norms, the Z_a construction and K_a.
    Rkhs {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ka")]
        mode: RkhsMode,
        /// CSV file with columns `t,f` (or a single column `f` on [0,T]).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Fill point for `za` and `ka`.
        #[arg(long, default_value_t = 0.2)]
        a: f64,
    },
    /// Run a verification suite, or `list` the available suites.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "core")]
        suite: String,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Localtime { common, .. }
            | Command::Intersect { common, .. }
            | Command::Moments { common }
            | Command::Constants { common }
            | Command::Rkhs { common, .. }
            | Command::Verify { common, .. } => common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Localtime { .. } => "localtime",
            Command::Intersect { .. } => "intersect",
            Command::Moments { .. } => "moments",
            Command::Constants { .. } => "constants",
            Command::Rkhs { .. } => "rkhs",
            Command::Verify { .. } => "verify",
        }
    }
}

/// Fully resolved settings of one invocation. The output path and worker
/// count are left out: neither affects the results.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: String,
    #[serde(rename = "H")]
    pub h: f64,
    pub d: usize,
    pub p: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub eps: Option<f64>,
    pub replicas: usize,
    pub m_max: usize,
    pub budget: u64,
    pub seed: u64,
    pub format: Format,
}

struct Defaults {
    h: f64,
    d: usize,
    p: usize,
    n: usize,
    replicas: usize,
    m_max: usize,
    budget: u64,
    format: Format,
}

fn defaults(cmd: &Command) -> Defaults {
    let base = Defaults {
        h: 0.5,
        d: 1,
        p: 2,
        n: 1024,
        replicas: 1000,
        m_max: 6,
        budget: 1_000_000,
        format: Format::Json,
    };
    match cmd {
        Command::Simulate { .. } => Defaults {
            replicas: 1,
            format: Format::Csv,
            ..base
        },
        Command::Intersect { .. } => Defaults {
            h: 0.25,
            n: 256,
            replicas: 100,
            ..base
        },
        Command::Moments { .. } => Defaults { h: 0.4, ..base },
        Command::Rkhs { .. } => Defaults {
            h: 0.25,
            n: fracld::rkhs::DEFAULT_TAIL_GRID,
            ..base
        },
        _ => base,
    }
}

impl ExperimentConfig {
    /// Applies defaults and checks the model parameters.
    pub fn resolve(cmd: &Command) -> Result<Self, CliError> {
        let c = cmd.common();
        let def = defaults(cmd);
        let cfg = ExperimentConfig {
            subcommand: cmd.name().to_string(),
            h: c.h.unwrap_or(def.h),
            d: c.d.unwrap_or(def.d),
            p: c.p.unwrap_or(def.p),
            n: c.n.unwrap_or(def.n),
            horizon: c.horizon.unwrap_or(1.0),
            eps: c.eps,
            replicas: c.replicas.unwrap_or(def.replicas),
            m_max: c.m_max.unwrap_or(def.m_max),
            budget: c.budget.unwrap_or(def.budget),
            seed: c.seed,
            format: c.format.unwrap_or(def.format),
        };
        if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
            return Err(CliError::Usage(format!(
                "--T must be positive, got {}",
                cfg.horizon
            )));
        }
        if cfg.n < 2 {
            return Err(CliError::Usage(format!(
                "--n must be at least 2, got {}",
                cfg.n
            )));
        }
        if let Some(e) = cfg.eps {
            if !(e > 0.0) || !e.is_finite() {
                return Err(CliError::Usage(format!("--eps must be positive, got {e}")));
            }
        }
        cfg.params().validate_basic()?;
        Ok(cfg)
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::with_p(self.h, self.d, self.p)
    }
}
