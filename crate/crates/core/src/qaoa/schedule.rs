use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};
use crate::qaoa::estimate::{seeded_rng, EstimatorConfig};
use crate::qaoa::evolve::QaoaProblem;
use crate::qaoa::optimizer::{minimize, OptimizerConfig};
use crate::qaoa::params::{interpolate_params, QaoaParams};

pub const SAMPLE20_STARTS: usize = 20;
pub const SAMPLE20_GAMMA_BOX: f64 = 10.0 * PI;
pub const SAMPLE20_BETA_BOX: f64 = PI;

const LINEAR_INIT_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    Sample20,
    Ols,
    Iols,
    Iqaoa,
}

impl std::str::FromStr for Scheduler {
    type Err = QbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample20" => Ok(Self::Sample20),
            "ols" => Ok(Self::Ols),
            "iols" => Ok(Self::Iols),
            "iqaoa" => Ok(Self::Iqaoa),
            other => Err(QbError::Config(format!("unknown scheduler {other:?}"))),
        }
    }
}

/// Settings shared by every scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub optimizer: OptimizerConfig,
    /// Seed for random starts; shot RNGs use the estimator seed.
    pub seed: u64,
    /// Starting `(m1, m2)` of the linear schedule; drawn from the Sample20
    /// boxes with `seed` when absent.
    pub linear_init: Option<(f64, f64)>,
    pub starts: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { optimizer: OptimizerConfig::default(), seed: 0, linear_init: None, starts: SAMPLE20_STARTS }
    }
}

/// One optimised depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub p: usize,
    pub init: QaoaParams,
    /// Objective at `init`.
    pub init_value: f64,
    pub params: QaoaParams,
    pub value: f64,
    pub evaluations: usize,
    /// Best-so-far objective per evaluation.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleOutcome {
    pub scheduler: Scheduler,
    /// Final result per depth; a single entry for the non-iterative schedulers.
    pub levels: Vec<LevelResult>,
    /// Every random start with its optimised value (Sample20 only).
    pub starts: Vec<(QaoaParams, f64)>,
}

impl ScheduleOutcome {
    pub fn last(&self) -> &LevelResult {
        self.levels.last().expect("at least one level")
    }

    pub fn evaluations(&self) -> usize {
        self.levels.iter().map(|l| l.evaluations).sum()
    }
}

/// Optimise all `2p` angles starting from `init`.
pub fn refine(
    problem: &QaoaProblem,
    est: &EstimatorConfig,
    init: &QaoaParams,
    opt: &OptimizerConfig,
    stream: u64,
) -> Result<LevelResult> {
    let mut ev = problem.evaluator(*est, stream)?;
    let r = minimize(|x| ev.objective_flat(x), &init.to_flat(), opt)?;
    Ok(LevelResult {
        p: init.p(),
        init: init.clone(),
        init_value: r.trace[0],
        params: QaoaParams::from_flat(&r.x)?,
        value: r.value,
        evaluations: r.evaluations,
        trace: r.trace,
    })
}

/// Random starts inside the Sample20 boxes, drawn in start order.
pub fn sample20_starts(p: usize, starts: usize, seed: u64) -> Result<Vec<QaoaParams>> {
    let mut rng = seeded_rng(seed);
    (0..starts)
        .map(|_| {
            let gamma = (0..p).map(|_| rng.random_range(-SAMPLE20_GAMMA_BOX..SAMPLE20_GAMMA_BOX)).collect();
            let beta = (0..p).map(|_| rng.random_range(-SAMPLE20_BETA_BOX..SAMPLE20_BETA_BOX)).collect();
            QaoaParams::new(gamma, beta)
        })
        .collect()
}

/// Optimise every random start and keep the lowest objective (first on ties).
pub fn schedule_sample20(problem: &QaoaProblem, est: &EstimatorConfig, p: usize, cfg: &ScheduleConfig) -> Result<ScheduleOutcome> {
    check_depth(p)?;
    if cfg.starts == 0 {
        return Err(QbError::Config("need at least one start".into()));
    }
    let inits = sample20_starts(p, cfg.starts, cfg.seed)?;
    let results: Vec<Result<LevelResult>> =
        problem.par.map_indexed(inits.len(), |k| refine(problem, est, &inits[k], &cfg.optimizer, k as u64));
    let results: Vec<LevelResult> = results.into_iter().collect::<Result<_>>()?;
    let mut best = 0;
    for (k, r) in results.iter().enumerate() {
        if r.value < results[best].value {
            best = k;
        }
    }
    let starts = results.iter().map(|r| (r.params.clone(), r.value)).collect();
    let evaluations: usize = results.iter().map(|r| r.evaluations).sum();
    let mut level = results[best].clone();
    level.evaluations = evaluations;
    Ok(ScheduleOutcome { scheduler: Scheduler::Sample20, levels: vec![level], starts })
}

/// Optimise `(m1, m2)` of the linear ramp, then refine all angles.
pub fn schedule_ols(problem: &QaoaProblem, est: &EstimatorConfig, p: usize, cfg: &ScheduleConfig) -> Result<ScheduleOutcome> {
    check_depth(p)?;
    let level = ols_level(problem, est, p, cfg)?;
    Ok(ScheduleOutcome { scheduler: Scheduler::Ols, levels: vec![level], starts: Vec::new() })
}

fn ols_level(problem: &QaoaProblem, est: &EstimatorConfig, p: usize, cfg: &ScheduleConfig) -> Result<LevelResult> {
    let mut ev = problem.evaluator(*est, 0)?;
    let (m1, m2) = cfg.linear_init.unwrap_or_else(|| {
        let mut rng = seeded_rng(cfg.seed);
        rng.set_stream(LINEAR_INIT_STREAM);
        (rng.random_range(-SAMPLE20_GAMMA_BOX..SAMPLE20_GAMMA_BOX), rng.random_range(-SAMPLE20_BETA_BOX..SAMPLE20_BETA_BOX))
    });
    let lin = minimize(|m| ev.objective(&QaoaParams::linear(p, m[0], m[1])?), &[m1, m2], &cfg.optimizer)?;
    let init = QaoaParams::linear(p, lin.x[0], lin.x[1])?;
    let mut level = refine(problem, est, &init, &cfg.optimizer, 1)?;
    level.evaluations += lin.evaluations;
    let mut trace = lin.trace;
    let floor = *trace.last().expect("at least one evaluation");
    trace.extend(level.trace.iter().map(|v| v.min(floor)));
    level.trace = trace;
    Ok(level)
}

/// Depths `1..=p_max`, each initialised by interpolating the previous optimum.
pub fn schedule_iols(problem: &QaoaProblem, est: &EstimatorConfig, p_max: usize, cfg: &ScheduleConfig) -> Result<ScheduleOutcome> {
    iterative(problem, est, p_max, cfg, Scheduler::Iols, interpolate_params)
}

/// Depths `1..=p_max`, each initialised by appending an identity layer.
pub fn schedule_iqaoa(problem: &QaoaProblem, est: &EstimatorConfig, p_max: usize, cfg: &ScheduleConfig) -> Result<ScheduleOutcome> {
    iterative(problem, est, p_max, cfg, Scheduler::Iqaoa, QaoaParams::append_zero_layer)
}

fn iterative(
    problem: &QaoaProblem,
    est: &EstimatorConfig,
    p_max: usize,
    cfg: &ScheduleConfig,
    scheduler: Scheduler,
    grow: fn(&QaoaParams) -> QaoaParams,
) -> Result<ScheduleOutcome> {
    check_depth(p_max)?;
    let mut levels = vec![ols_level(problem, est, 1, cfg)?];
    for p in 2..=p_max {
        let init = grow(&levels[p - 2].params);
        levels.push(refine(problem, est, &init, &cfg.optimizer, p as u64)?);
    }
    Ok(ScheduleOutcome { scheduler, levels, starts: Vec::new() })
}

pub fn run_scheduler(
    problem: &QaoaProblem,
    est: &EstimatorConfig,
    scheduler: Scheduler,
    p: usize,
    cfg: &ScheduleConfig,
) -> Result<ScheduleOutcome> {
    match scheduler {
        Scheduler::Sample20 => schedule_sample20(problem, est, p, cfg),
        Scheduler::Ols => schedule_ols(problem, est, p, cfg),
        Scheduler::Iols => schedule_iols(problem, est, p, cfg),
        Scheduler::Iqaoa => schedule_iqaoa(problem, est, p, cfg),
    }
}

fn check_depth(p: usize) -> Result<()> {
    if p == 0 {
        return Err(QbError::InvalidParameters("depth must be at least 1".into()));
    }
    Ok(())
}
