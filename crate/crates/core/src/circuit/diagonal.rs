use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::state::StateVector;
use crate::encoding::QubitLayout;
use crate::error::{QbError, Result};
use crate::parallel::Parallelism;
use crate::problem::IntegerModel;

/// Largest register the simulator will allocate by default.
pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Phase-separation Hamiltonian as a diagonal in the computational basis.
///
/// Basis states that decode to the same portfolio share a cost, so the
/// diagonal is stored as a class index per basis state plus one cost per
/// class. For a layout-derived diagonal the class is the mixed-radix index of
/// the decoded vector `y`.
#[derive(Debug, Clone)]
pub struct DiagonalCost {
    classes: Vec<u32>,
    class_costs: Vec<f64>,
    eta: f64,
}

impl DiagonalCost {
    /// One class per basis state.
    pub fn from_values(values: Vec<f64>, eta: f64) -> Result<Self> {
        if !values.len().is_power_of_two() {
            return Err(QbError::DimensionMismatch { expected: values.len().next_power_of_two(), got: values.len() });
        }
        Ok(Self { classes: (0..values.len() as u32).collect(), class_costs: values, eta })
    }

    pub fn dim(&self) -> usize {
        self.classes.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Unscaled cost of basis state `z`.
    pub fn value(&self, z: usize) -> f64 {
        self.class_costs[self.classes[z] as usize]
    }

    /// Dense unscaled diagonal.
    pub fn values(&self) -> Vec<f64> {
        self.classes.iter().map(|&c| self.class_costs[c as usize]).collect()
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn class_costs(&self) -> &[f64] {
        &self.class_costs
    }

    /// `⟨ψ|C|ψ⟩` with the unscaled diagonal.
    pub fn expectation(&self, state: &StateVector) -> f64 {
        state
            .amplitudes()
            .iter()
            .zip(&self.classes)
            .map(|(a, &c)| a.norm_sqr() * self.class_costs[c as usize])
            .sum()
    }
}

/// Mixed-radix index of `y` with radices `R_i + 1` (first variable least
/// significant).
pub fn portfolio_key(y: &[u64], ranges: &[u64]) -> usize {
    let mut key = 0usize;
    for (v, r) in y.iter().zip(ranges).rev() {
        key = key * (*r as usize + 1) + *v as usize;
    }
    key
}

pub fn portfolio_from_key(mut key: usize, ranges: &[u64]) -> Vec<u64> {
    ranges
        .iter()
        .map(|r| {
            let radix = *r as usize + 1;
            let v = key % radix;
            key /= radix;
            v as u64
        })
        .collect()
}

/// Per-basis costs `cost(decode(z) + L)` in the units of `model`.
pub fn precompute_diagonal(model: &IntegerModel, layout: &QubitLayout, eta: f64) -> Result<DiagonalCost> {
    precompute_diagonal_capped(model, layout, eta, DEFAULT_QUBIT_CAP)
}

pub fn precompute_diagonal_capped(model: &IntegerModel, layout: &QubitLayout, eta: f64, cap: usize) -> Result<DiagonalCost> {
    let n = layout.n_qubits();
    if n > cap {
        return Err(QbError::CapExceeded { size: n as f64, cap: cap as f64 });
    }
    if layout.n_assets() != model.n_vars() {
        return Err(QbError::DimensionMismatch { expected: model.n_vars(), got: layout.n_assets() });
    }
    for i in 0..model.n_vars() {
        let r = (model.upper[i] - model.lower[i]) as u64;
        if layout.ranges[i] != r {
            return Err(QbError::InvalidModel(format!(
                "layout range {} for variable {i} does not match model range {r}",
                layout.ranges[i]
            )));
        }
    }
    let ranges = &layout.ranges;
    let n_classes: usize = ranges.iter().map(|&r| r as usize + 1).product();
    let class_costs = (0..n_classes)
        .map(|key| {
            let x: Vec<i64> = portfolio_from_key(key, ranges)
                .iter()
                .zip(&model.lower)
                .map(|(&y, &l)| y as i64 + l)
                .collect();
            model.cost_unchecked(&x)
        })
        .collect();
    // key contribution of each qubit; keys are additive over set bits
    let mut stride = vec![0usize; model.n_vars()];
    let mut acc = 1usize;
    for (i, r) in ranges.iter().enumerate() {
        stride[i] = acc;
        acc *= *r as usize + 1;
    }
    let qubit_key: Vec<usize> = (0..n).map(|m| layout.values[m] as usize * stride[layout.assets[m]]).collect();
    let mut classes = vec![0u32; 1 << n];
    for z in 1..classes.len() {
        let low = z.trailing_zeros() as usize;
        classes[z] = classes[z & (z - 1)] + qubit_key[low] as u32;
    }
    Ok(DiagonalCost { classes, class_costs, eta })
}

/// `amp_z ← amp_z · exp(-i γ η C_z)`.
pub fn apply_phase(state: &mut StateVector, diag: &DiagonalCost, gamma: f64, par: Parallelism) -> Result<()> {
    if state.dim() != diag.dim() {
        return Err(QbError::DimensionMismatch { expected: diag.dim(), got: state.dim() });
    }
    if gamma == 0.0 {
        return Ok(());
    }
    let scale = -gamma * diag.eta;
    let phases: Vec<Complex64> = diag
        .class_costs
        .iter()
        .map(|&c| Complex64::from_polar(1.0, scale * c))
        .collect();
    state.apply_class_phases(&diag.classes, &phases, par);
    Ok(())
}

/// Serialisable view of a diagonal for debugging small registers.
#[derive(Debug, Serialize)]
pub struct DiagonalDump {
    pub eta: f64,
    pub values: Vec<f64>,
}

impl From<&DiagonalCost> for DiagonalDump {
    fn from(d: &DiagonalCost) -> Self {
        Self { eta: d.eta, values: d.values() }
    }
}
