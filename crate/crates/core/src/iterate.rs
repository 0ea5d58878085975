//! Precision-increasing refinement: solve on a coarse grid, then repeatedly
//! shrink the grid step by `λ` and re-centre a proportionally smaller box on
//! the previous solution, so the qubit count stays roughly constant.

use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};
use crate::market_data::MarketMoments;
use crate::parallel::Parallelism;
use crate::problem::discretize;
use crate::qaoa::{run_scheduler, EstimatorConfig, QaoaProblem, RunReport, ScheduleConfig, Scheduler};

/// Slack when snapping window edges to the grid.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub alpha0: f64,
    pub lambda: f64,
    /// Refinements after the initial solve.
    pub iterations: usize,
    /// Continuous target of `Σw` (1 for fully invested, 0 for market neutral).
    pub sum_target: f64,
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(QbError::Config(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(QbError::Config("need at least one iteration".into()));
        }
        if !(self.alpha0 > 0.0) {
            return Err(QbError::Config(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        Ok(())
    }

    /// `α_i = α_0 λ^i`.
    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha0 * self.lambda.powi(i as i32)
    }
}

/// Box on the `α` grid, stored in integer grid units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub alpha: f64,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    /// `Σx` in grid units.
    pub sum: i64,
    /// Some edge was cut back to the original bounds.
    pub clamped: bool,
}

impl Window {
    pub fn lower_weights(&self) -> Vec<f64> {
        self.lower.iter().map(|&v| v as f64 * self.alpha).collect()
    }

    pub fn upper_weights(&self) -> Vec<f64> {
        self.upper.iter().map(|&v| v as f64 * self.alpha).collect()
    }

    pub fn ranges(&self) -> Vec<u64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l) as u64).collect()
    }

    pub fn contains(&self, units: &[i64]) -> bool {
        units.len() == self.lower.len() && units.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (l, u))| l <= x && x <= u)
    }

    pub fn is_feasible(&self) -> bool {
        self.lower.iter().sum::<i64>() <= self.sum && self.sum <= self.upper.iter().sum::<i64>()
    }
}

fn sum_units(target: f64, alpha: f64) -> Result<i64> {
    let units = target / alpha;
    if (units - units.round()).abs() > GRID_EPS * units.abs().max(1.0) {
        return Err(QbError::GridMisaligned { value: target, alpha });
    }
    Ok(units.round() as i64)
}

/// The starting window `[l0, u0]` on the `α_0` grid; edges must already be
/// grid points.
pub fn initial_window(config: &IterationConfig, l0: &[f64], u0: &[f64]) -> Result<Window> {
    config.validate()?;
    check_bounds(l0, u0)?;
    let a = config.alpha0;
    let snap = |v: f64| sum_units(v, a);
    let window = Window {
        alpha: a,
        lower: l0.iter().map(|&v| snap(v)).collect::<Result<_>>()?,
        upper: u0.iter().map(|&v| snap(v)).collect::<Result<_>>()?,
        sum: sum_units(config.sum_target, a)?,
        clamped: false,
    };
    if !window.is_feasible() {
        return Err(QbError::Infeasible(format!("initial window cannot reach Σw = {}", config.sum_target)));
    }
    Ok(window)
}

/// Window of iteration `i ≥ 1` around the previous solution `x` (weights):
/// `x ± (u0 - l0)·λ^i / 2`, clamped to `[l0, u0]`, then widened outward to the
/// `α_i` grid and clamped again.
pub fn next_window(config: &IterationConfig, i: usize, x: &[f64], l0: &[f64], u0: &[f64]) -> Result<Window> {
    config.validate()?;
    check_bounds(l0, u0)?;
    if x.len() != l0.len() {
        return Err(QbError::DimensionMismatch { expected: l0.len(), got: x.len() });
    }
    let lam = config.lambda.powi(i as i32);
    let alpha = config.alpha(i);
    let mut lower = Vec::with_capacity(x.len());
    let mut upper = Vec::with_capacity(x.len());
    let mut clamped = false;
    for k in 0..x.len() {
        let half = (u0[k] - l0[k]) * lam / 2.0;
        let (lo, hi) = (x[k] - half, x[k] + half);
        clamped |= lo < l0[k] - GRID_EPS || hi > u0[k] + GRID_EPS;
        let lo = lo.max(l0[k]);
        let hi = hi.min(u0[k]);
        let floor_l0 = (l0[k] / alpha - GRID_EPS).ceil() as i64;
        let ceil_u0 = (u0[k] / alpha + GRID_EPS).floor() as i64;
        lower.push(((lo / alpha + GRID_EPS).floor() as i64).max(floor_l0));
        upper.push(((hi / alpha - GRID_EPS).ceil() as i64).min(ceil_u0));
    }
    Ok(Window { alpha, lower, upper, sum: sum_units(config.sum_target, alpha)?, clamped })
}

/// `x / α` when `x` lies on the grid.
pub fn to_units(x: &[f64], alpha: f64) -> Option<Vec<i64>> {
    x.iter()
        .map(|&v| {
            let u = v / alpha;
            ((u - u.round()).abs() <= GRID_EPS * u.abs().max(1.0)).then_some(u.round() as i64)
        })
        .collect()
}

fn check_bounds(l0: &[f64], u0: &[f64]) -> Result<()> {
    if l0.len() != u0.len() {
        return Err(QbError::DimensionMismatch { expected: l0.len(), got: u0.len() });
    }
    if let Some(k) = (0..l0.len()).find(|&k| l0[k] > u0[k]) {
        return Err(QbError::InvalidModel(format!("lower bound {} above upper bound {} for asset {k}", l0[k], u0[k])));
    }
    Ok(())
}

/// What an inner solve returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solve<R> {
    /// Chosen solution in grid units of the window.
    pub units: Vec<i64>,
    /// Objective of the solution (comparable across precisions).
    pub cost: f64,
    pub n_qubits: usize,
    pub detail: R,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<R> {
    pub iteration: usize,
    pub window: Window,
    /// Solution weights `α·x`.
    pub x: Vec<f64>,
    pub cost: f64,
    pub n_qubits: usize,
    /// The previous solution is a grid point of this window and lies inside it.
    pub previous_representable: bool,
    pub detail: R,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineOutcome<R> {
    pub records: Vec<IterationRecord<R>>,
    /// Set when a window turned infeasible and the run stopped early.
    pub halted: Option<String>,
}

impl<R> RefineOutcome<R> {
    pub fn final_x(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.x.as_slice())
    }
}

/// Run the refinement loop. `solver` receives each window (grid step `α_i`,
/// not `λ^i`) and returns its chosen point.
pub fn refine<R, S>(mut solver: S, config: &IterationConfig, l0: &[f64], u0: &[f64]) -> Result<RefineOutcome<R>>
where
    S: FnMut(&Window) -> Result<Solve<R>>,
{
    let first = initial_window(config, l0, u0)?;
    let mut records = Vec::with_capacity(config.iterations + 1);
    let solve = solver(&first)?;
    records.push(record(0, first, solve, true)?);
    for i in 1..=config.iterations {
        let prev = records.last().expect("non-empty").x.clone();
        let window = next_window(config, i, &prev, l0, u0)?;
        if !window.is_feasible() {
            return Ok(RefineOutcome {
                records,
                halted: Some(format!("window of iteration {i} cannot satisfy the sum constraint")),
            });
        }
        let representable = to_units(&prev, window.alpha).is_some_and(|u| window.contains(&u));
        let solve = solver(&window)?;
        records.push(record(i, window, solve, representable)?);
    }
    Ok(RefineOutcome { records, halted: None })
}

fn record<R>(iteration: usize, window: Window, solve: Solve<R>, previous_representable: bool) -> Result<IterationRecord<R>> {
    if !window.contains(&solve.units) {
        return Err(QbError::InvalidModel(format!("solver returned {:?} outside its window", solve.units)));
    }
    Ok(IterationRecord {
        iteration,
        x: solve.units.iter().map(|&u| u as f64 * window.alpha).collect(),
        window,
        cost: solve.cost,
        n_qubits: solve.n_qubits,
        previous_representable,
        detail: solve.detail,
    })
}

/// Inner QAOA run used at every precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaoaSettings {
    pub q: f64,
    pub eta: f64,
    pub p: usize,
    pub scheduler: Scheduler,
    pub estimator: EstimatorConfig,
    pub schedule: ScheduleConfig,
}

/// Solver that discretises `moments` on each window, runs the scheduler and
/// returns the report's best portfolio. `cost` is the continuous objective.
pub fn qaoa_solver<'a>(
    moments: &'a MarketMoments,
    settings: &'a QaoaSettings,
    sum_target: f64,
    par: Parallelism,
) -> impl FnMut(&Window) -> Result<Solve<RunReport>> + 'a {
    move |w: &Window| {
        let model = discretize(moments, settings.q, w.alpha, &w.lower_weights(), &w.upper_weights(), sum_target)?;
        let problem = QaoaProblem::new(model, settings.eta)?.with_parallelism(par);
        let stats = problem.brute_force()?;
        let outcome = run_scheduler(&problem, &settings.estimator, settings.scheduler, settings.p, &settings.schedule)?;
        let report = RunReport::build(&problem, &settings.estimator, &outcome, &stats)?;
        Ok(Solve { units: report.best_x.clone(), cost: report.best_cost, n_qubits: problem.n_qubits(), detail: report })
    }
}

/// Row of the per-iteration summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub iteration: usize,
    pub alpha: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub x: Vec<f64>,
    pub cost: f64,
    pub n_qubits: usize,
    pub clamped: bool,
    pub previous_representable: bool,
}

impl<R> RefineOutcome<R> {
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.records
            .iter()
            .map(|r| SummaryRow {
                iteration: r.iteration,
                alpha: r.window.alpha,
                lower: r.window.lower_weights(),
                upper: r.window.upper_weights(),
                x: r.x.clone(),
                cost: r.cost,
                n_qubits: r.n_qubits,
                clamped: r.window.clamped,
                previous_representable: r.previous_representable,
            })
            .collect()
    }
}
