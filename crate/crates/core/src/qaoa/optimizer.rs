//! Derivative-free minimisation with linear models on a simplex and a
//! shrinking trust region, in the style of Powell's COBYLA (unconstrained).
//!
//! The simplex holds `n + 1` evaluated points. Each iteration interpolates
//! a linear model through them, steps a distance `ρ` down its gradient and
//! swaps the new point into the simplex. `ρ` is halved whenever the model
//! stops predicting progress on a well-shaped simplex; badly shaped simplices
//! are repaired first by a geometry step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Initial trust radius (also the initial simplex edge).
    pub rho_begin: f64,
    /// Final trust radius; reaching it ends the run.
    pub rho_end: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { budget: 1000, rho_begin: 0.5, rho_end: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    /// Best point seen.
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best-so-far value after every evaluation.
    pub trace: Vec<f64>,
}

struct Tracker<F> {
    f: F,
    budget: usize,
    best_x: Vec<f64>,
    best_f: f64,
    trace: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Tracker<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(QbError::NonFiniteObjective(v));
        }
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        self.trace.push(self.best_f);
        Ok(v)
    }

    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }
}

const ACCEPT_RATIO: f64 = 0.1;
const MIN_SIGMA: f64 = 0.25;
const MAX_EDGE: f64 = 2.1;
const GEOMETRY_STEP: f64 = 0.5;

/// Minimise `f` from `x0`. The returned point is the best evaluated one,
/// which is `x0` itself whenever nothing strictly better was found.
pub fn minimize<F>(f: F, x0: &[f64], config: &OptimizerConfig) -> Result<OptimizeResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if config.budget == 0 {
        return Err(QbError::Config("optimizer budget must be at least 1".into()));
    }
    if !(config.rho_begin > 0.0 && config.rho_end > 0.0 && config.rho_end <= config.rho_begin) {
        return Err(QbError::Config(format!(
            "need 0 < rho_end <= rho_begin, got {} and {}",
            config.rho_end, config.rho_begin
        )));
    }
    let n = x0.len();
    let mut t = Tracker { f, budget: config.budget, best_x: x0.to_vec(), best_f: f64::INFINITY, trace: Vec::new() };
    let f0 = t.eval(x0)?;
    let mut rho = config.rho_begin;

    let mut pts = vec![x0.to_vec()];
    let mut fs = vec![f0];
    let mut base = 0;
    for k in 0..n {
        if t.exhausted() {
            return Ok(finish(t));
        }
        let mut x = x0.to_vec();
        x[k] += rho;
        fs.push(t.eval(&x)?);
        pts.push(x);
    }

    let mut pending_shrink = false;
    while n > 0 && !t.exhausted() {
        for i in 0..=n {
            if fs[i] < fs[base] {
                base = i;
            }
        }
        let others: Vec<usize> = (0..=n).filter(|&i| i != base).collect();
        let xb = pts[base].clone();
        let d = DMatrix::from_fn(n, n, |r, c| pts[others[r]][c] - xb[c]);
        let Some(dinv) = d.clone().try_inverse() else {
            // collapsed simplex: rebuild it on the coordinate axes
            for (k, &i) in others.iter().enumerate() {
                if t.exhausted() {
                    break;
                }
                let mut x = xb.clone();
                x[k] += rho;
                fs[i] = t.eval(&x)?;
                pts[i] = x;
            }
            continue;
        };
        let df = DVector::from_fn(n, |r, _| fs[others[r]] - fs[base]);
        let g = &dinv * df;
        let gnorm = g.norm();

        if pending_shrink || gnorm == 0.0 {
            pending_shrink = false;
            match bad_vertex(&d, &dinv, rho) {
                Some(k) => {
                    let w = dinv.column(k).into_owned();
                    let dir = &w / w.norm();
                    let sign = if g.dot(&dir) > 0.0 { -1.0 } else { 1.0 };
                    let x: Vec<f64> = (0..n).map(|c| xb[c] + sign * GEOMETRY_STEP * rho * dir[c]).collect();
                    let i = others[k];
                    fs[i] = t.eval(&x)?;
                    pts[i] = x;
                }
                None => {
                    if rho <= config.rho_end {
                        break;
                    }
                    rho = if 0.5 * rho <= 1.5 * config.rho_end { config.rho_end } else { 0.5 * rho };
                }
            }
            continue;
        }

        let s = -&g * (rho / gnorm);
        let x_new: Vec<f64> = (0..n).map(|c| xb[c] + s[c]).collect();
        let f_new = t.eval(&x_new)?;
        let ratio = (fs[base] - f_new) / (rho * gnorm);

        // coordinates of the step in the simplex edge basis
        let sigma = dinv.transpose() * &s;
        let mut pick = None;
        let mut best_w = 0.0;
        for (k, &i) in others.iter().enumerate() {
            let dist: f64 = pts[i].iter().zip(&x_new).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let w = sigma[k].abs() * (dist / rho).max(1.0);
            if w > best_w {
                best_w = w;
                pick = Some(i);
            }
        }
        if let Some(i) = pick {
            if f_new < fs[base] || best_w > 1.0 {
                pts[i] = x_new;
                fs[i] = f_new;
            }
        }
        if ratio < ACCEPT_RATIO {
            pending_shrink = true;
        }
    }
    Ok(finish(t))
}

/// Vertex spoiling the simplex shape at radius `rho`: the longest edge above
/// `MAX_EDGE·ρ`, otherwise the flattest vertex below `MIN_SIGMA·ρ`.
fn bad_vertex(d: &DMatrix<f64>, dinv: &DMatrix<f64>, rho: f64) -> Option<usize> {
    let n = d.nrows();
    let edge: Vec<f64> = (0..n).map(|k| d.row(k).norm()).collect();
    let (k_far, far) = edge.iter().copied().enumerate().fold((0, 0.0), |acc, (k, e)| if e > acc.1 { (k, e) } else { acc });
    if far > MAX_EDGE * rho {
        return Some(k_far);
    }
    let vsig: Vec<f64> = (0..n).map(|k| 1.0 / dinv.column(k).norm()).collect();
    let (k_flat, flat) =
        vsig.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    (flat < MIN_SIGMA * rho).then_some(k_flat)
}

fn finish<F>(t: Tracker<F>) -> OptimizeResult {
    OptimizeResult { x: t.best_x, value: t.best_f, evaluations: t.trace.len(), trace: t.trace }
}
