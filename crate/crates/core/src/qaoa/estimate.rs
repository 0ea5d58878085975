use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::circuit::{DiagonalCost, StateVector};
use crate::error::{QbError, Result};
use crate::qaoa::report::cdf_rows;

/// Large studies use `1e6` shots; the default is smaller.
pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Mean cost.
    Normal,
    /// Mean cost of the best `τ` fraction.
    Cvar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Read the distribution straight from the amplitudes.
    Exact,
    /// Multinomial draws of `samples` shots.
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub objective: Objective,
    pub mode: Mode,
    pub tau: f64,
    pub samples: u64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { objective: Objective::Cvar, mode: Mode::Exact, tau: DEFAULT_TAU, samples: DEFAULT_SAMPLES, seed: 0 }
    }
}

impl EstimatorConfig {
    /// `normal`, `cvar` (sampling) or `exact` (exact normal); the mode can be
    /// overridden afterwards.
    pub fn from_kind(kind: &str) -> Result<Self> {
        let base = Self::default();
        match kind {
            "normal" => Ok(Self { objective: Objective::Normal, mode: Mode::Sampling, ..base }),
            "cvar" => Ok(Self { objective: Objective::Cvar, mode: Mode::Sampling, ..base }),
            "exact" => Ok(Self { objective: Objective::Normal, mode: Mode::Exact, ..base }),
            other => Err(QbError::Config(format!("unknown estimator {other:?}, expected normal, cvar or exact"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(QbError::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.samples == 0 {
            return Err(QbError::Config("sample count must be at least 1".into()));
        }
        Ok(())
    }
}

/// One outcome class: a portfolio key, its cost and its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub key: usize,
    pub cost: f64,
    pub probability: f64,
}

/// Measurement distribution aggregated per portfolio, sorted by cost (ties by
/// key). Only outcomes with non-zero probability are kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub outcomes: Vec<Outcome>,
}

impl Distribution {
    pub fn from_state(state: &StateVector, diag: &DiagonalCost) -> Result<Self> {
        if state.dim() != diag.dim() {
            return Err(QbError::DimensionMismatch { expected: diag.dim(), got: state.dim() });
        }
        let mut mass = vec![0.0; diag.class_costs().len()];
        for (a, &c) in state.amplitudes().iter().zip(diag.classes()) {
            mass[c as usize] += a.norm_sqr();
        }
        let outcomes = mass
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(key, probability)| Outcome { key, cost: diag.class_costs()[key], probability })
            .collect();
        Ok(Self::from_outcomes(outcomes))
    }

    /// Sorts the given outcomes by cost.
    pub fn from_outcomes(mut outcomes: Vec<Outcome>) -> Self {
        outcomes.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.key.cmp(&b.key)));
        Self { outcomes }
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    /// Lowest-cost outcome whose probability is at least `min_probability`.
    pub fn best_above(&self, min_probability: f64) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.probability >= min_probability)
    }

    /// `(cost, probability, cumulative)`, one row per distinct cost.
    pub fn cdf(&self) -> Vec<(f64, f64, f64)> {
        cdf_rows(self.outcomes.iter().map(|o| (o.cost, o.probability)))
    }

    /// Multinomial draw of `shots` outcomes via sequential binomials.
    pub fn sample(&self, shots: u64, rng: &mut ChaCha8Rng) -> Samples {
        let mut counts = Vec::with_capacity(self.outcomes.len());
        let mut left = shots;
        let mut mass_left = self.total_probability();
        for o in &self.outcomes {
            if left == 0 {
                break;
            }
            let p = if mass_left > 0.0 { (o.probability / mass_left).clamp(0.0, 1.0) } else { 1.0 };
            let n = if p >= 1.0 { left } else { Binomial::new(left, p).expect("p in [0, 1]").sample(rng) };
            if n > 0 {
                counts.push((o.key, o.cost, n));
            }
            left -= n;
            mass_left -= o.probability;
        }
        // rounding can leave a few shots undrawn; they go to the last outcome
        if left > 0 {
            if let Some(o) = self.outcomes.last() {
                match counts.last_mut() {
                    Some(c) if c.0 == o.key => c.2 += left,
                    _ => counts.push((o.key, o.cost, left)),
                }
            }
        }
        Samples { counts, shots }
    }
}

/// Shot counts per outcome, in ascending cost order.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub counts: Vec<(usize, f64, u64)>,
    pub shots: u64,
}

/// `Σ p·c` over the exact distribution.
pub fn normal_exact(dist: &Distribution) -> f64 {
    dist.outcomes.iter().map(|o| o.probability * o.cost).sum()
}

/// Expected cost over the lowest `τ` probability mass; the boundary outcome
/// contributes fractionally.
pub fn cvar_exact(dist: &Distribution, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(QbError::Config(format!("tau must lie in (0, 1], got {tau}")));
    }
    let target = tau * dist.total_probability();
    if target <= 0.0 {
        return Err(QbError::InvalidParameters("empty tail".into()));
    }
    let mut mass = 0.0;
    let mut acc = 0.0;
    for o in &dist.outcomes {
        let take = o.probability.min(target - mass);
        acc += take * o.cost;
        mass += take;
        if mass >= target {
            break;
        }
    }
    Ok(acc / mass)
}

pub fn normal_sampled(samples: &Samples) -> f64 {
    samples.counts.iter().map(|&(_, c, n)| c * n as f64).sum::<f64>() / samples.shots as f64
}

/// Mean of the `⌈τK⌉` lowest-cost shots.
pub fn cvar_sampled(samples: &Samples, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(QbError::Config(format!("tau must lie in (0, 1], got {tau}")));
    }
    let want = (tau * samples.shots as f64).ceil() as u64;
    if want == 0 {
        return Err(QbError::InvalidParameters("empty tail".into()));
    }
    let mut left = want;
    let mut acc = 0.0;
    for &(_, c, n) in &samples.counts {
        let take = n.min(left);
        acc += c * take as f64;
        left -= take;
        if left == 0 {
            break;
        }
    }
    Ok(acc / (want - left) as f64)
}

/// Estimator value of a distribution under `config`; `rng` is used only in
/// sampling mode.
pub fn estimate(dist: &Distribution, config: &EstimatorConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    match config.mode {
        Mode::Exact => match config.objective {
            Objective::Normal => Ok(normal_exact(dist)),
            Objective::Cvar => cvar_exact(dist, config.tau),
        },
        Mode::Sampling => {
            let s = dist.sample(config.samples, rng);
            match config.objective {
                Objective::Normal => Ok(normal_sampled(&s)),
                Objective::Cvar => cvar_sampled(&s, config.tau),
            }
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(C_W - C_A) / (C_W - C_O)`, and whether the instance was degenerate
/// (`C_W = C_O`, reported as 1).
pub fn approximation_ratio(c_a: f64, c_o: f64, c_w: f64) -> (f64, bool) {
    let span = c_w - c_o;
    if span.abs() <= f64::EPSILON * c_w.abs().max(c_o.abs()).max(1.0) {
        return (1.0, true);
    }
    ((c_w - c_a) / span, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(points: &[(f64, f64)]) -> Distribution {
        Distribution::from_outcomes(
            points.iter().enumerate().map(|(key, &(cost, probability))| Outcome { key, cost, probability }).collect(),
        )
    }

    #[test]
    fn two_point_examples() {
        let d = dist(&[(0.0, 0.5), (2.0, 0.5)]);
        assert_eq!(normal_exact(&d), 1.0);
        assert_eq!(cvar_exact(&d, 0.5).unwrap(), 0.0);
        assert_eq!(cvar_exact(&d, 1.0).unwrap(), 1.0);
        assert!((cvar_exact(&d, 0.75).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn basis_state_cost() {
        let d = dist(&[(3.5, 1.0)]);
        assert_eq!(normal_exact(&d), 3.5);
        assert_eq!(cvar_exact(&d, 0.05).unwrap(), 3.5);
    }

    #[test]
    fn bad_tau() {
        let d = dist(&[(1.0, 1.0)]);
        assert!(cvar_exact(&d, 0.0).is_err());
        assert!(cvar_exact(&d, 1.5).is_err());
    }

    #[test]
    fn sampled_tail_takes_lowest_shots() {
        let s = Samples { counts: vec![(0, 1.0, 3), (1, 5.0, 7)], shots: 10 };
        assert_eq!(cvar_sampled(&s, 0.2).unwrap(), 1.0);
        assert_eq!(cvar_sampled(&s, 0.5).unwrap(), (3.0 + 10.0) / 5.0);
        assert_eq!(normal_sampled(&s), 3.8);
    }

    #[test]
    fn sample_counts_sum_to_shots() {
        let d = dist(&[(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]);
        let s = d.sample(1000, &mut seeded_rng(7));
        assert_eq!(s.counts.iter().map(|c| c.2).sum::<u64>(), 1000);
        let again = d.sample(1000, &mut seeded_rng(7));
        assert_eq!(s, again);
    }

    #[test]
    fn cdf_merges_equal_costs() {
        let d = dist(&[(1.0, 0.25), (1.0, 0.25), (2.0, 0.5)]);
        assert_eq!(d.cdf(), vec![(1.0, 0.5, 0.5), (2.0, 0.5, 1.0)]);
    }

    #[test]
    fn ratio_fixtures() {
        assert_eq!(approximation_ratio(1.0, 1.0, 3.0), (1.0, false));
        assert_eq!(approximation_ratio(3.0, 1.0, 3.0), (0.0, false));
        assert_eq!(approximation_ratio(2.0, 1.0, 3.0), (0.5, false));
        assert_eq!(approximation_ratio(2.0, 2.0, 2.0), (1.0, true));
    }

    #[test]
    fn estimator_kinds() {
        assert_eq!(EstimatorConfig::from_kind("exact").unwrap().mode, Mode::Exact);
        assert_eq!(EstimatorConfig::from_kind("cvar").unwrap().objective, Objective::Cvar);
        assert!(EstimatorConfig::from_kind("median").is_err());
    }
}
