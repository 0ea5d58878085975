use std::io::Write;

use serde::Serialize;

use crate::error::{QbError, Result};
use crate::problem::BruteForceStats;
use crate::qaoa::estimate::{approximation_ratio, cvar_exact, estimate, normal_exact, seeded_rng, Distribution, EstimatorConfig, Mode};
use crate::qaoa::evolve::QaoaProblem;
use crate::qaoa::params::QaoaParams;
use crate::qaoa::schedule::{ScheduleOutcome, Scheduler};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub x: Vec<i64>,
    pub cost: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub p: usize,
    pub value: f64,
    pub evaluations: usize,
    pub params: QaoaParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scheduler: Scheduler,
    pub p: usize,
    pub n_qubits: usize,
    pub eta: f64,
    pub estimator: EstimatorConfig,
    pub params: QaoaParams,
    /// Objective of the final parameters under the configured estimator.
    pub estimator_value: f64,
    /// Lowest objective seen during the final optimisation.
    pub best_seen_value: f64,
    pub normal_exact: f64,
    pub cvar_exact: f64,
    pub optimal_cost: f64,
    pub worst_cost: f64,
    pub uniform_cost: f64,
    pub ar_normal: f64,
    pub ar_cvar: f64,
    /// Ratio with `C_A` the configured estimator value.
    pub ar: f64,
    /// `C_W = C_O`; all ratios are reported as 1.
    pub degenerate: bool,
    pub best_x: Vec<i64>,
    pub best_cost: f64,
    pub offset: f64,
    pub evaluations: usize,
    pub levels: Vec<LevelSummary>,
    pub trace: Vec<f64>,
    pub distribution: Vec<OutcomeRow>,
}

impl RunReport {
    /// Evaluate `params` once more and collect statistics against the
    /// brute-force bounds.
    pub fn build(
        problem: &QaoaProblem,
        est: &EstimatorConfig,
        outcome: &ScheduleOutcome,
        stats: &BruteForceStats,
    ) -> Result<Self> {
        let last = outcome.last();
        let state = problem.evolve(&last.params)?;
        let dist = problem.distribution(&state)?;
        let total = dist.total_probability();
        if (total - 1.0).abs() > 1e-9 {
            return Err(QbError::NormDrift(total));
        }
        let mut rng = seeded_rng(est.seed);
        rng.set_stream(u64::MAX);
        let estimator_value = estimate(&dist, est, &mut rng)?;
        let ne = normal_exact(&dist);
        let ce = cvar_exact(&dist, est.tau)?;
        let (c_o, c_w) = (stats.optimal_cost, stats.worst_cost);
        let (ar_normal, degenerate) = approximation_ratio(ne, c_o, c_w);
        let (ar_cvar, _) = approximation_ratio(ce, c_o, c_w);
        let (ar, _) = approximation_ratio(estimator_value, c_o, c_w);
        let best = best_outcome(&dist, est);
        Ok(Self {
            scheduler: outcome.scheduler,
            p: last.p,
            n_qubits: problem.n_qubits(),
            eta: problem.eta(),
            estimator: *est,
            params: last.params.clone(),
            estimator_value,
            best_seen_value: last.value,
            normal_exact: ne,
            cvar_exact: ce,
            optimal_cost: c_o,
            worst_cost: c_w,
            uniform_cost: stats.uniform_mean,
            ar_normal,
            ar_cvar,
            ar,
            degenerate,
            best_x: problem.portfolio(best.0),
            best_cost: best.1,
            offset: problem.shifted.offset,
            evaluations: outcome.evaluations(),
            levels: outcome
                .levels
                .iter()
                .map(|l| LevelSummary { p: l.p, value: l.value, evaluations: l.evaluations, params: l.params.clone() })
                .collect(),
            trace: last.trace.clone(),
            distribution: dist
                .outcomes
                .iter()
                .map(|o| OutcomeRow { x: problem.portfolio(o.key), cost: o.cost, probability: o.probability })
                .collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn cdf(&self) -> Vec<(f64, f64, f64)> {
        cdf_rows(self.distribution.iter().map(|r| (r.cost, r.probability)))
    }
}

/// In exact mode the lowest-cost portfolio that `K` shots would see with
/// even odds (`p ≥ 1/K`); in sampling mode the lowest-cost drawn portfolio.
fn best_outcome(dist: &Distribution, est: &EstimatorConfig) -> (usize, f64) {
    match est.mode {
        Mode::Exact => {
            let o = dist
                .best_above(1.0 / est.samples as f64)
                .or_else(|| dist.outcomes.iter().max_by(|a, b| a.probability.total_cmp(&b.probability)))
                .expect("non-empty distribution");
            (o.key, o.cost)
        }
        Mode::Sampling => {
            let mut rng = seeded_rng(est.seed);
            rng.set_stream(u64::MAX - 1);
            let s = dist.sample(est.samples, &mut rng);
            let (key, cost, _) = s.counts[0];
            (key, cost)
        }
    }
}

/// Merge `(cost, probability)` pairs, given in ascending cost order, into one
/// row per distinct cost with the running total.
pub fn cdf_rows(rows: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    let mut acc = 0.0;
    for (c, p) in rows {
        acc += p;
        match out.last_mut() {
            Some(last) if last.0 == c => {
                last.1 += p;
                last.2 = acc;
            }
            _ => out.push((c, p, acc)),
        }
    }
    out
}

/// CSV with header `cost,probability,cumulative`.
pub fn write_cdf_csv<W: Write>(rows: &[(f64, f64, f64)], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["cost", "probability", "cumulative"])?;
    for (c, p, cum) in rows {
        wr.write_record([c.to_string(), p.to_string(), cum.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}
