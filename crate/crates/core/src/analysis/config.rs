//! TOML experiment configuration.
//!
//! All keys live at the top level; unknown keys are rejected. Paths are
//! resolved against the directory holding the config file.
//!
//! ```toml
//! kind = "instance"            # sweep-qubits | mixability | instance | iterate | solve
//! seed = 0
//! moments = "moments.json"     # or: prices = "closes.csv", tickers = [...]
//! alpha = 0.5
//! lower = -1.0                 # scalar or one value per asset
//! upper = 1.0
//! sum = 1.0
//! q = 18.415                   # or: mu = 0.002
//! p = 8                        # integer or list
//! scheduler = "iqaoa"          # name or list
//! estimator = "cvar"           # normal | cvar | exact
//! exact = true                 # evaluate the objective on exact probabilities
//! tau = 0.05
//! K = 100000
//! eta = 1.0
//! budget = 1000
//! repetitions = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};
use crate::qaoa::{EstimatorConfig, Mode, OptimizerConfig, ScheduleConfig, Scheduler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SweepQubits,
    Mixability,
    Instance,
    Iterate,
    Solve,
}

/// A single value or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,

    pub prices: Option<PathBuf>,
    pub moments: Option<PathBuf>,
    pub tickers: Option<Vec<String>>,

    pub alpha: Option<f64>,
    pub lower: Option<OneOrMany<f64>>,
    pub upper: Option<OneOrMany<f64>>,
    #[serde(default = "one")]
    pub sum: f64,
    pub q: Option<f64>,
    pub mu: Option<f64>,

    #[serde(default = "default_p")]
    pub p: OneOrMany<usize>,
    #[serde(default = "default_scheduler")]
    pub scheduler: OneOrMany<Scheduler>,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(rename = "K", default = "default_samples")]
    pub samples: u64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_rho_begin")]
    pub rho_begin: f64,
    #[serde(default = "default_rho_end")]
    pub rho_end: f64,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,

    pub lambda: Option<f64>,
    pub iterations: Option<usize>,

    /// Variable ranges for a mixability study.
    pub ranges: Option<Vec<u64>>,
    /// Integer sum constraint for a mixability study.
    pub d_hat: Option<u64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,

    #[serde(default = "default_max_range")]
    pub max_range: u64,
}

fn one() -> f64 {
    1.0
}
fn default_p() -> OneOrMany<usize> {
    OneOrMany::One(1)
}
fn default_scheduler() -> OneOrMany<Scheduler> {
    OneOrMany::One(Scheduler::Iqaoa)
}
fn default_estimator() -> String {
    "cvar".into()
}
fn default_tau() -> f64 {
    crate::qaoa::estimate::DEFAULT_TAU
}
fn default_samples() -> u64 {
    crate::qaoa::estimate::DEFAULT_SAMPLES
}
fn default_budget() -> usize {
    OptimizerConfig::default().budget
}
fn default_rho_begin() -> f64 {
    OptimizerConfig::default().rho_begin
}
fn default_rho_end() -> f64 {
    OptimizerConfig::default().rho_end
}
fn default_starts() -> usize {
    crate::qaoa::schedule::SAMPLE20_STARTS
}
fn default_repetitions() -> usize {
    1
}
fn default_epsilon() -> f64 {
    super::mixability::DEFAULT_EPSILON
}
fn default_cap() -> usize {
    super::mixability::DEFAULT_ENCODING_CAP
}
fn default_max_range() -> u64 {
    4096
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| QbError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and validate a config file, returning it with its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text)?, dir))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = &self.tickers {
            if t.is_empty() {
                return Err(QbError::Config("tickers must not be empty".into()));
            }
        }
        if self.repetitions == 0 {
            return Err(QbError::Config("repetitions must be at least 1".into()));
        }
        if self.p.to_vec().is_empty() || self.scheduler.to_vec().is_empty() {
            return Err(QbError::Config("p and scheduler must not be empty lists".into()));
        }
        self.estimator_config(self.seed)?;
        let market = self.prices.is_some() || self.moments.is_some();
        match self.kind {
            ExperimentKind::Instance | ExperimentKind::Iterate | ExperimentKind::Solve => {
                if !market {
                    return Err(QbError::Config("need `prices` or `moments`".into()));
                }
                if self.prices.is_some() && self.moments.is_some() {
                    return Err(QbError::Config("give either `prices` or `moments`, not both".into()));
                }
                if self.q.is_some() == self.mu.is_some() {
                    return Err(QbError::Config("give exactly one of `q` and `mu`".into()));
                }
                for (name, v) in [("alpha", self.alpha.is_some()), ("lower", self.lower.is_some()), ("upper", self.upper.is_some())] {
                    if !v {
                        return Err(QbError::Config(format!("missing `{name}`")));
                    }
                }
                if self.kind == ExperimentKind::Iterate && (self.lambda.is_none() || self.iterations.is_none()) {
                    return Err(QbError::Config("iterate needs `lambda` and `iterations`".into()));
                }
            }
            ExperimentKind::Mixability => {
                if self.ranges.as_ref().is_none_or(|r| r.is_empty()) || self.d_hat.is_none() {
                    return Err(QbError::Config("mixability needs non-empty `ranges` and `d_hat`".into()));
                }
            }
            ExperimentKind::SweepQubits => {
                if self.max_range == 0 {
                    return Err(QbError::Config("max_range must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn estimator_config(&self, seed: u64) -> Result<EstimatorConfig> {
        let mut est = EstimatorConfig::from_kind(&self.estimator)?;
        if self.exact {
            est.mode = Mode::Exact;
        }
        est.tau = self.tau;
        est.samples = self.samples;
        est.seed = seed;
        est.validate()?;
        Ok(est)
    }

    pub fn schedule_config(&self, seed: u64) -> ScheduleConfig {
        ScheduleConfig {
            optimizer: OptimizerConfig { budget: self.budget, rho_begin: self.rho_begin, rho_end: self.rho_end },
            seed,
            linear_init: None,
            starts: self.starts,
        }
    }

    /// Per-asset bounds, broadcasting scalars to `n` assets.
    pub fn bounds(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let expand = |name: &str, b: &Option<OneOrMany<f64>>| -> Result<Vec<f64>> {
            match b {
                Some(OneOrMany::One(v)) => Ok(vec![*v; n]),
                Some(OneOrMany::Many(v)) if v.len() == n => Ok(v.clone()),
                Some(OneOrMany::Many(v)) => {
                    Err(QbError::Config(format!("`{name}` has {} entries for {n} assets", v.len())))
                }
                None => Err(QbError::Config(format!("missing `{name}`"))),
            }
        };
        Ok((expand("lower", &self.lower)?, expand("upper", &self.upper)?))
    }
}
