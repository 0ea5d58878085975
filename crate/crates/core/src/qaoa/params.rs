use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};

/// Angles of a depth-`p` circuit: `gamma[i]` drives the phase separator and
/// `beta[i]` the mixer of layer `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || gamma.len() != beta.len() {
            return Err(QbError::InvalidParameters(format!(
                "need equal, non-zero angle counts, got {} gamma and {} beta",
                gamma.len(),
                beta.len()
            )));
        }
        Ok(Self { gamma, beta })
    }

    pub fn zeros(p: usize) -> Result<Self> {
        Self::new(vec![0.0; p], vec![0.0; p])
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }

    /// Flat vector `[γ_1..γ_p, β_1..β_p]` handed to the optimizer.
    pub fn to_flat(&self) -> Vec<f64> {
        self.gamma.iter().chain(&self.beta).copied().collect()
    }

    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(QbError::InvalidParameters(format!("odd flat length {}", x.len())));
        }
        let p = x.len() / 2;
        Self::new(x[..p].to_vec(), x[p..].to_vec())
    }

    /// Linear ramp `γ_i = m1·d_i`, `β_i = m2·(1 - d_i)`.
    pub fn linear(p: usize, m1: f64, m2: f64) -> Result<Self> {
        let d = linear_coordinates(p);
        Self::new(d.iter().map(|d| m1 * d).collect(), d.iter().map(|d| m2 * (1.0 - d)).collect())
    }

    /// Same angles with one identity layer `γ = β = 0` appended.
    pub fn append_zero_layer(&self) -> Self {
        let mut out = self.clone();
        out.gamma.push(0.0);
        out.beta.push(0.0);
        out
    }
}

/// `d_i = (2i - 1) / (2p)` for `i = 1..p`.
pub fn linear_coordinates(p: usize) -> Vec<f64> {
    (1..=p).map(|i| (2 * i - 1) as f64 / (2 * p) as f64).collect()
}

/// Evaluate at `at` the line through the two points of `(xs, ys)` adjacent to
/// it: the bracketing pair inside the range, the end pair outside. A single
/// point gives a constant.
pub fn interpolate_linear(xs: &[f64], ys: &[f64], at: f64) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    if xs.len() == 1 {
        return ys[0];
    }
    let last = xs.len() - 2;
    let j = xs.windows(2).position(|w| at <= w[1]).unwrap_or(last).min(last);
    let t = (at - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] + t * (ys[j + 1] - ys[j])
}

/// Initial depth-`p + 1` angles interpolated from depth-`p` optima.
pub fn interpolate_params(prev: &QaoaParams) -> QaoaParams {
    let p = prev.p();
    let xs = linear_coordinates(p);
    let d = linear_coordinates(p + 1);
    QaoaParams {
        gamma: d.iter().map(|&x| interpolate_linear(&xs, &prev.gamma, x)).collect(),
        beta: d.iter().map(|&x| interpolate_linear(&xs, &prev.beta, x)).collect(),
    }
}
