//! Bounded-integer quadratic programs with a sum constraint.
//!
//! [`IntegerModel`] is `min xᵀσx + μᵀx` subject to `Σx = D`, `L ≤ x ≤ U`.
//! [`ShiftedModel`] substitutes `y = x - L` so every variable ranges over
//! `0..=R_i`; the dropped constant is kept in [`ShiftedModel::offset`] so
//! costs can always be reported in the original units.

use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};
use crate::market_data::MarketMoments;

/// Default cap on `Π (R_i + 1)` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: f64 = 1e8;

const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerModel {
    pub sigma: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    #[serde(rename = "L")]
    pub lower: Vec<i64>,
    #[serde(rename = "U")]
    pub upper: Vec<i64>,
    #[serde(rename = "D")]
    pub sum: i64,
}

impl IntegerModel {
    pub fn new(sigma: Vec<Vec<f64>>, mu: Vec<f64>, lower: Vec<i64>, upper: Vec<i64>, sum: i64) -> Result<Self> {
        let m = Self { sigma, mu, lower, upper, sum };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if n == 0 {
            return Err(QbError::InvalidModel("model has no variables".into()));
        }
        for len in [self.lower.len(), self.upper.len(), self.sigma.len()] {
            if len != n {
                return Err(QbError::DimensionMismatch { expected: n, got: len });
            }
        }
        if let Some(r) = self.sigma.iter().find(|r| r.len() != n) {
            return Err(QbError::DimensionMismatch { expected: n, got: r.len() });
        }
        let scale = self.sigma.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (self.sigma[i][j] - self.sigma[j][i]).abs() > 1e-12 * scale {
                    return Err(QbError::InvalidModel(format!("sigma not symmetric at ({i},{j})")));
                }
            }
            if self.lower[i] > self.upper[i] {
                return Err(QbError::InvalidModel(format!(
                    "variable {i}: lower bound {} above upper bound {}",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        let lo: i64 = self.lower.iter().sum();
        let hi: i64 = self.upper.iter().sum();
        if self.sum < lo || self.sum > hi {
            return Err(QbError::Infeasible(format!(
                "sum target {} outside [{lo}, {hi}]",
                self.sum
            )));
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.mu.len()
    }

    /// `ΣΣ σ_ij x_i x_j + Σ μ_i x_i`. Bounds are not enforced.
    pub fn cost(&self, x: &[i64]) -> Result<f64> {
        if x.len() != self.n_vars() {
            return Err(QbError::DimensionMismatch { expected: self.n_vars(), got: x.len() });
        }
        Ok(self.cost_unchecked(x))
    }

    pub(crate) fn cost_unchecked(&self, x: &[i64]) -> f64 {
        quadratic_cost(&self.sigma, &self.mu, x.iter().map(|&v| v as f64))
    }

    pub fn is_feasible(&self, x: &[i64]) -> bool {
        x.len() == self.n_vars()
            && x.iter().sum::<i64>() == self.sum
            && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| l <= v && v <= u)
    }

    pub fn shift(&self) -> ShiftedModel {
        shift(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

fn quadratic_cost(sigma: &[Vec<f64>], mu: &[f64], x: impl Iterator<Item = f64> + Clone) -> f64 {
    let xs: Vec<f64> = x.collect();
    let mut total = 0.0;
    for (i, xi) in xs.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let row: f64 = sigma[i].iter().zip(&xs).map(|(s, xj)| s * xj).sum();
        total += xi * (row + mu[i]);
    }
    total
}

/// Integer precision grid index `v / alpha`, or an error when `v` is off-grid.
pub fn grid_units(value: f64, alpha: f64) -> Result<i64> {
    let units = value / alpha;
    let rounded = units.round();
    if (units - rounded).abs() > GRID_TOLERANCE * rounded.abs().max(1.0) {
        return Err(QbError::GridMisaligned { value, alpha });
    }
    Ok(rounded as i64)
}

/// Map the Lagrangian mean-variance objective `q/2 wᵀΣw - wᵀE` with weights
/// on the grid `w = αx` and `Σw = sum_target` onto an [`IntegerModel`].
///
/// The integer cost of `x` equals the continuous objective at `w = αx`.
pub fn discretize(
    moments: &MarketMoments,
    q: f64,
    alpha: f64,
    lower: &[f64],
    upper: &[f64],
    sum_target: f64,
) -> Result<IntegerModel> {
    let n = moments.n_assets();
    for len in [lower.len(), upper.len()] {
        if len != n {
            return Err(QbError::DimensionMismatch { expected: n, got: len });
        }
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(QbError::InvalidModel(format!("precision {alpha} must be positive")));
    }
    let inv = grid_units(1.0, alpha)
        .map_err(|_| QbError::InvalidModel(format!("1/alpha = {} is not an integer", 1.0 / alpha)))?;
    if inv < 1 {
        return Err(QbError::InvalidModel(format!("1/alpha = {inv} must be at least 1")));
    }
    let lo = lower.iter().map(|&l| grid_units(l, alpha)).collect::<Result<Vec<_>>>()?;
    let hi = upper.iter().map(|&u| grid_units(u, alpha)).collect::<Result<Vec<_>>>()?;
    let sum = grid_units(sum_target, alpha)?;
    let a2 = alpha * alpha;
    let sigma = moments
        .covariance
        .iter()
        .map(|row| row.iter().map(|s| 0.5 * q * s * a2).collect())
        .collect();
    let mu = moments.expectation.iter().map(|e| -e * alpha).collect();
    IntegerModel::new(sigma, mu, lo, hi, sum)
}

/// Continuous objective `q/2 wᵀΣw - wᵀE`.
pub fn markowitz_objective(moments: &MarketMoments, q: f64, w: &[f64]) -> f64 {
    let n = moments.n_assets();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += w[i] * moments.covariance[i][j] * w[j];
        }
    }
    let lin: f64 = w.iter().zip(&moments.expectation).map(|(a, b)| a * b).sum();
    0.5 * q * quad - lin
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedModel {
    pub sigma: Vec<Vec<f64>>,
    pub mu_hat: Vec<f64>,
    pub range: Vec<u64>,
    pub sum: u64,
    /// Lower bounds of the originating model, `x = y + L`.
    pub lower: Vec<i64>,
    /// `ΣΣ σ_ij L_i L_j + Σ μ_i L_i`, dropped by the substitution.
    pub offset: f64,
}

pub fn shift(model: &IntegerModel) -> ShiftedModel {
    let n = model.n_vars();
    let lower = model.lower.clone();
    let mu_hat = (0..n)
        .map(|i| {
            let pull: f64 = (0..n).map(|j| model.sigma[i][j] * lower[j] as f64).sum();
            model.mu[i] + 2.0 * pull
        })
        .collect();
    let range = (0..n).map(|i| (model.upper[i] - model.lower[i]) as u64).collect();
    let sum = (model.sum - lower.iter().sum::<i64>()) as u64;
    let offset = model.cost_unchecked(&lower);
    ShiftedModel { sigma: model.sigma.clone(), mu_hat, range, sum, lower, offset }
}

impl ShiftedModel {
    pub fn n_vars(&self) -> usize {
        self.range.len()
    }

    /// `yᵀσy + μ̂ᵀy` without the offset.
    pub fn shifted_cost(&self, y: &[u64]) -> f64 {
        quadratic_cost(&self.sigma, &self.mu_hat, y.iter().map(|&v| v as f64))
    }

    /// Cost in the units of the original model.
    pub fn absolute_cost(&self, y: &[u64]) -> f64 {
        self.shifted_cost(y) + self.offset
    }

    pub fn unshift(&self, y: &[u64]) -> Vec<i64> {
        y.iter().zip(&self.lower).map(|(&v, &l)| v as i64 + l).collect()
    }

    /// Number of candidate points `Π (R_i + 1)` before the sum filter.
    pub fn box_size(&self) -> f64 {
        self.range.iter().map(|&r| r as f64 + 1.0).product()
    }
}

/// Fill variables in order, each to its range, until the sum is exhausted.
pub fn greedy_allocation(range: &[u64], sum: u64) -> Result<Vec<u64>> {
    let total: u64 = range.iter().sum();
    if sum > total {
        return Err(QbError::Infeasible(format!("sum {sum} exceeds total range {total}")));
    }
    let mut left = sum;
    Ok(range
        .iter()
        .map(|&r| {
            let take = r.min(left);
            left -= take;
            take
        })
        .collect())
}

/// Every `y` with `0 ≤ y_i ≤ R_i` and `Σy = D̂`, in lexicographic order.
#[derive(Debug, Clone)]
pub struct FeasibleIter {
    range: Vec<u64>,
    /// `suffix[i] = Σ_{k ≥ i} R_k`
    suffix: Vec<u64>,
    current: Option<Vec<u64>>,
}

impl FeasibleIter {
    fn new(range: Vec<u64>, sum: u64) -> Self {
        let n = range.len();
        let mut suffix = vec![0u64; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + range[i];
        }
        let current = if n > 0 && sum <= suffix[0] {
            let mut y = vec![0u64; n];
            fill_smallest(&range, &suffix, &mut y, 0, sum);
            Some(y)
        } else if n == 0 && sum == 0 {
            Some(vec![])
        } else {
            None
        };
        Self { range, suffix, current }
    }
}

/// Lexicographically smallest completion of positions `from..` summing to `left`.
fn fill_smallest(range: &[u64], suffix: &[u64], y: &mut [u64], from: usize, mut left: u64) {
    for i in from..range.len() {
        let v = left.saturating_sub(suffix[i + 1]);
        y[i] = v;
        left -= v;
    }
}

impl Iterator for FeasibleIter {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let out = self.current.take()?;
        let n = out.len();
        if n >= 2 {
            let mut y = out.clone();
            // remaining mass after position k is `tail`; bump the rightmost
            // position that can still grow while its tail stays fillable
            let mut tail = y[n - 1];
            for k in (0..n - 1).rev() {
                if y[k] < self.range[k] && tail >= 1 {
                    y[k] += 1;
                    fill_smallest(&self.range, &self.suffix, &mut y, k + 1, tail - 1);
                    self.current = Some(y);
                    break;
                }
                tail += y[k];
            }
        }
        Some(out)
    }
}

pub fn enumerate_feasible(shifted: &ShiftedModel) -> Result<FeasibleIter> {
    enumerate_feasible_capped(&shifted.range, shifted.sum, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_feasible_capped(range: &[u64], sum: u64, cap: f64) -> Result<FeasibleIter> {
    let size: f64 = range.iter().map(|&r| r as f64 + 1.0).product();
    if size > cap {
        return Err(QbError::CapExceeded { size, cap });
    }
    Ok(FeasibleIter::new(range.to_vec(), sum))
}

/// Exhaustive statistics over the feasible set, in original-model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceStats {
    pub optimal_cost: f64,
    pub worst_cost: f64,
    /// Mean cost when every distinct feasible solution is equally likely.
    pub uniform_mean: f64,
    pub count: u64,
    pub optimal_x: Vec<i64>,
    pub worst_x: Vec<i64>,
}

pub fn brute_force_stats(shifted: &ShiftedModel, model: &IntegerModel) -> Result<BruteForceStats> {
    let mut best: Option<(f64, Vec<u64>)> = None;
    let mut worst: Option<(f64, Vec<u64>)> = None;
    let mut total = 0.0;
    let mut count = 0u64;
    for y in enumerate_feasible(shifted)? {
        let x = shifted.unshift(&y);
        let c = model.cost_unchecked(&x);
        total += c;
        count += 1;
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, y.clone()));
        }
        if worst.as_ref().is_none_or(|(w, _)| c > *w) {
            worst = Some((c, y));
        }
    }
    let (optimal_cost, by) = best.ok_or_else(|| QbError::Infeasible("empty feasible set".into()))?;
    let (worst_cost, wy) = worst.expect("non-empty");
    Ok(BruteForceStats {
        optimal_cost,
        worst_cost,
        uniform_mean: total / count as f64,
        count,
        optimal_x: shifted.unshift(&by),
        worst_x: shifted.unshift(&wy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Number of bounded compositions by dynamic programming.
    fn lattice_count(range: &[u64], sum: u64) -> u64 {
        let mut ways = vec![0u64; sum as usize + 1];
        ways[0] = 1;
        for &r in range {
            let mut next = vec![0u64; sum as usize + 1];
            for (s, &w) in ways.iter().enumerate() {
                for v in 0..=r as usize {
                    if s + v <= sum as usize {
                        next[s + v] += w;
                    }
                }
            }
            ways = next;
        }
        ways[sum as usize]
    }

    fn naive_cost(m: &IntegerModel, x: &[i64]) -> f64 {
        let n = x.len();
        let mut c = 0.0;
        for i in 0..n {
            for j in 0..n {
                c += m.sigma[i][j] * x[i] as f64 * x[j] as f64;
            }
            c += m.mu[i] * x[i] as f64;
        }
        c
    }

    fn small_model(n: usize, seed: u64) -> IntegerModel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut sigma = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                sigma[i][j] = v;
                sigma[j][i] = v;
            }
        }
        let mu = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lower: Vec<i64> = (0..n).map(|_| rng.random_range(-3..=0)).collect();
        let upper: Vec<i64> = lower.iter().map(|l| l + rng.random_range(0..=3)).collect();
        let lo: i64 = lower.iter().sum();
        let hi: i64 = upper.iter().sum();
        IntegerModel::new(sigma, mu, lower, upper, rng.random_range(lo..=hi)).unwrap()
    }

    #[test]
    fn cost_hand_values() {
        let m = IntegerModel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], vec![0, 0], vec![3, 3], 3).unwrap();
        assert_eq!(m.cost(&[0, 0]).unwrap(), 0.0);
        assert_eq!(m.cost(&[1, 2]).unwrap(), 5.0);
        assert!(matches!(m.cost(&[1]), Err(QbError::DimensionMismatch { .. })));
    }

    #[test]
    fn cost_matches_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for t in 0..1000 {
            let m = small_model(1 + t % 6, t as u64);
            let x: Vec<i64> = (0..m.n_vars()).map(|_| rng.random_range(-5..=5)).collect();
            let a = m.cost(&x).unwrap();
            let b = naive_cost(&m, &x);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn infeasible_model_rejected() {
        let e = IntegerModel::new(vec![vec![0.0]], vec![0.0], vec![0], vec![2], 3).unwrap_err();
        assert!(matches!(e, QbError::Infeasible(_)));
    }

    #[test]
    fn zero_shift_is_identity() {
        let m = IntegerModel::new(vec![vec![1.0, 0.5], vec![0.5, 2.0]], vec![0.3, -0.1], vec![0, 0], vec![4, 5], 6).unwrap();
        let s = m.shift();
        assert_eq!(s.mu_hat, m.mu);
        assert_eq!(s.sum, 6);
        assert_eq!(s.range, vec![4, 5]);
        assert_eq!(s.offset, 0.0);
    }

    #[test]
    fn instance_one_shift() {
        let m = IntegerModel::new(vec![vec![0.0; 6]; 6], vec![0.0; 6], vec![-2; 6], vec![2; 6], 2).unwrap();
        let s = m.shift();
        assert_eq!(s.sum, 14);
        assert_eq!(s.range, vec![4; 6]);
    }

    #[test]
    fn shift_constant_is_constant() {
        for seed in 0..20 {
            let m = small_model(4, 100 + seed);
            let s = m.shift();
            let diffs: Vec<f64> = enumerate_feasible(&s)
                .unwrap()
                .map(|y| m.cost(&s.unshift(&y)).unwrap() - s.shifted_cost(&y))
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64;
            assert!(var < 1e-18, "variance {var}");
            assert!((mean - s.offset).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_fixtures() {
        assert_eq!(greedy_allocation(&[4; 6], 14).unwrap(), vec![4, 4, 4, 2, 0, 0]);
        assert_eq!(greedy_allocation(&[4; 6], 0).unwrap(), vec![0; 6]);
        assert_eq!(greedy_allocation(&[5], 5).unwrap(), vec![5]);
        assert!(greedy_allocation(&[1, 1], 3).is_err());
    }

    #[test]
    fn enumeration_fixtures() {
        let all: Vec<_> = enumerate_feasible_capped(&[20, 20], 20, 1e8).unwrap().collect();
        assert_eq!(all.len(), 21);
        assert_eq!(all[0], vec![0, 20]);
        assert_eq!(all[20], vec![20, 0]);
        let one: Vec<_> = enumerate_feasible_capped(&[1, 1], 2, 1e8).unwrap().collect();
        assert_eq!(one, vec![vec![1, 1]]);
        let n = enumerate_feasible_capped(&[4; 6], 14, 1e8).unwrap().count() as u64;
        assert_eq!(n, lattice_count(&[4; 6], 14));
        assert!(enumerate_feasible_capped(&[1, 1], 3, 1e8).unwrap().next().is_none());
        assert!(matches!(
            enumerate_feasible_capped(&[100; 5], 5, 1e8),
            Err(QbError::CapExceeded { .. })
        ));
    }

    #[test]
    fn brute_force_fixtures() {
        let m = IntegerModel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], vec![0, 0], vec![1, 1], 1).unwrap();
        let st = brute_force_stats(&m.shift(), &m).unwrap();
        assert_eq!((st.optimal_cost, st.worst_cost, st.uniform_mean, st.count), (1.0, 1.0, 1.0, 2));

        let single = IntegerModel::new(vec![vec![2.0]], vec![1.0], vec![3], vec![3], 3).unwrap();
        let st = brute_force_stats(&single.shift(), &single).unwrap();
        assert_eq!(st.optimal_cost, st.worst_cost);
        assert_eq!(st.optimal_cost, st.uniform_mean);
        assert_eq!(st.optimal_cost, 21.0);
    }

    #[test]
    fn discretize_matches_continuous_objective() {
        let moments = MarketMoments::new(
            vec![],
            vec![0.01, -0.02, 0.005],
            vec![vec![0.04, 0.01, 0.0], vec![0.01, 0.09, 0.02], vec![0.0, 0.02, 0.01]],
        )
        .unwrap();
        let (q, alpha) = (3.0, 0.25);
        let m = discretize(&moments, q, alpha, &[-1.0; 3], &[1.0; 3], 1.0).unwrap();
        assert_eq!(m.sum, 4);
        assert_eq!(m.lower, vec![-4; 3]);
        for y in enumerate_feasible(&m.shift()).unwrap() {
            let x = m.shift().unshift(&y);
            let w: Vec<f64> = x.iter().map(|&v| v as f64 * alpha).collect();
            let a = markowitz_objective(&moments, q, &w);
            let b = m.cost(&x).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn discretize_zero_moments_and_errors() {
        let z = MarketMoments::new(vec![], vec![0.0; 2], vec![vec![0.0; 2]; 2]).unwrap();
        let m = discretize(&z, 18.415, 0.5, &[-1.0; 2], &[1.0; 2], 1.0).unwrap();
        assert!(m.sigma.iter().flatten().all(|v| *v == 0.0));
        assert!(m.mu.iter().all(|v| *v == 0.0));
        assert_eq!((m.sum, m.lower[0], m.upper[0]), (2, -2, 2));
        assert!(matches!(
            discretize(&z, 1.0, 0.5, &[-0.3; 2], &[1.0; 2], 1.0),
            Err(QbError::GridMisaligned { .. })
        ));
        assert!(matches!(
            discretize(&z, 1.0, 0.5, &[0.0; 2], &[0.0; 2], 1.0),
            Err(QbError::Infeasible(_))
        ));
        assert!(discretize(&z, 1.0, 0.3, &[0.0; 2], &[0.9; 2], 0.9).is_err());
    }

    #[test]
    fn model_json_field_names() {
        let m = IntegerModel::new(vec![vec![1.0]], vec![0.5], vec![-1], vec![2], 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        for key in ["sigma", "mu", "L", "U", "D"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(IntegerModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    proptest! {
        #[test]
        fn greedy_respects_bounds(range in proptest::collection::vec(0u64..10, 1..8), frac in 0.0f64..=1.0) {
            let total: u64 = range.iter().sum();
            let sum = (total as f64 * frac).floor() as u64;
            let y = greedy_allocation(&range, sum).unwrap();
            prop_assert_eq!(y.iter().sum::<u64>(), sum);
            prop_assert!(y.iter().zip(&range).all(|(v, r)| v <= r));
        }

        #[test]
        fn enumeration_unique_and_complete(range in proptest::collection::vec(0u64..=6, 1..=6), frac in 0.0f64..=1.0) {
            let total: u64 = range.iter().sum();
            let sum = (total as f64 * frac).round() as u64;
            let all: Vec<_> = enumerate_feasible_capped(&range, sum, 1e8).unwrap().collect();
            prop_assert_eq!(all.len() as u64, lattice_count(&range, sum));
            for w in all.windows(2) {
                prop_assert!(w[0] < w[1], "not strictly lexicographic");
            }
            for y in &all {
                prop_assert_eq!(y.iter().sum::<u64>(), sum);
                prop_assert!(y.iter().zip(&range).all(|(v, r)| v <= r));
            }
        }
    }
}
