use rand_chacha::ChaCha8Rng;

use crate::circuit::diagonal::portfolio_from_key;
use crate::circuit::{apply_phase, initial_state, precompute_diagonal, DiagonalCost, MixerCircuit, StateVector};
use crate::encoding::{build_layout, QubitLayout};
use crate::error::{QbError, Result};
use crate::parallel::Parallelism;
use crate::problem::{brute_force_stats, greedy_allocation, BruteForceStats, IntegerModel, ShiftedModel};
use crate::qaoa::estimate::{estimate, seeded_rng, Distribution, EstimatorConfig};
use crate::qaoa::params::QaoaParams;

/// Everything fixed for a given integer model: encoding, diagonal, mixer
/// schedule and the initial basis state.
#[derive(Debug, Clone)]
pub struct QaoaProblem {
    pub model: IntegerModel,
    pub shifted: ShiftedModel,
    pub layout: QubitLayout,
    pub diag: DiagonalCost,
    pub mixer: MixerCircuit,
    /// Initial allocation in shifted coordinates.
    pub y0: Vec<u64>,
    pub init_index: usize,
    pub par: Parallelism,
}

impl QaoaProblem {
    /// Greedy initial allocation.
    pub fn new(model: IntegerModel, eta: f64) -> Result<Self> {
        let shifted = model.shift();
        let y0 = greedy_allocation(&shifted.range, shifted.sum)?;
        Self::with_initial(model, eta, y0)
    }

    pub fn with_initial(model: IntegerModel, eta: f64, y0: Vec<u64>) -> Result<Self> {
        model.validate()?;
        if !eta.is_finite() || eta == 0.0 {
            return Err(QbError::Config(format!("eta must be finite and non-zero, got {eta}")));
        }
        let shifted = model.shift();
        let layout = build_layout(&shifted.range);
        let diag = precompute_diagonal(&model, &layout, eta)?;
        let mixer = MixerCircuit::new(&layout)?;
        initial_state(&layout, shifted.sum, &y0)?;
        let init_index = layout.encode_canonical(&y0)?;
        Ok(Self { model, shifted, layout, diag, mixer, y0, init_index, par: Parallelism::default() })
    }

    pub fn with_parallelism(mut self, par: Parallelism) -> Self {
        self.par = par;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits()
    }

    pub fn eta(&self) -> f64 {
        self.diag.eta()
    }

    /// Overwrite `state` with `U_B(β_p) U_C(γ_p) ⋯ U_B(β_1) U_C(γ_1) |y0⟩`.
    pub fn evolve_into(&self, params: &QaoaParams, state: &mut StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits() {
            return Err(QbError::DimensionMismatch { expected: self.n_qubits(), got: state.n_qubits() });
        }
        state.set_basis(self.init_index)?;
        for (&g, &b) in params.gamma.iter().zip(&params.beta) {
            apply_phase(state, &self.diag, g, self.par)?;
            self.mixer.apply(state, b, self.par)?;
        }
        state.check_norm()
    }

    pub fn evolve(&self, params: &QaoaParams) -> Result<StateVector> {
        let mut s = StateVector::zero(self.n_qubits());
        self.evolve_into(params, &mut s)?;
        Ok(s)
    }

    pub fn distribution(&self, state: &StateVector) -> Result<Distribution> {
        Distribution::from_state(state, &self.diag)
    }

    /// Portfolio `x` (original units) of an outcome key.
    pub fn portfolio(&self, key: usize) -> Vec<i64> {
        self.shifted.unshift(&portfolio_from_key(key, &self.shifted.range))
    }

    pub fn brute_force(&self) -> Result<BruteForceStats> {
        brute_force_stats(&self.shifted, &self.model)
    }

    pub fn evaluator(&self, config: EstimatorConfig, stream: u64) -> Result<Evaluator<'_>> {
        Evaluator::new(self, config, stream)
    }
}

/// Objective function over parameters with its own scratch register and
/// shot RNG; one per optimizer run.
pub struct Evaluator<'a> {
    problem: &'a QaoaProblem,
    config: EstimatorConfig,
    state: StateVector,
    rng: ChaCha8Rng,
    evaluations: usize,
}

impl<'a> Evaluator<'a> {
    /// `stream` separates the shot RNGs of concurrent runs sharing a seed.
    pub fn new(problem: &'a QaoaProblem, config: EstimatorConfig, stream: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        rng.set_stream(stream);
        Ok(Self { problem, config, state: StateVector::zero(problem.n_qubits()), rng, evaluations: 0 })
    }

    pub fn objective(&mut self, params: &QaoaParams) -> Result<f64> {
        self.problem.evolve_into(params, &mut self.state)?;
        let dist = self.problem.distribution(&self.state)?;
        self.evaluations += 1;
        estimate(&dist, &self.config, &mut self.rng)
    }

    pub fn objective_flat(&mut self, x: &[f64]) -> Result<f64> {
        self.objective(&QaoaParams::from_flat(x)?)
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }
}
