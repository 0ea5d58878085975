use serde::Serialize;

use crate::circuit::state::StateVector;
use crate::encoding::QubitLayout;
use crate::error::{QbError, Result};
use crate::parallel::Parallelism;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Round {
    Odd,
    Even,
    Wrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MixerGate {
    Xy { a: usize, b: usize },
    /// `big` carries `2^level`, `s1` and `s2` carry `2^(level-1)`.
    Xyy { big: usize, s1: usize, s2: usize },
}

impl MixerGate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            MixerGate::Xy { a, b } => vec![a, b],
            MixerGate::Xyy { big, s1, s2 } => vec![big, s1, s2],
        }
    }

    pub fn apply(&self, state: &mut StateVector, beta: f64, par: Parallelism) -> Result<()> {
        match *self {
            MixerGate::Xy { a, b } => state.apply_xy(a, b, beta, par),
            MixerGate::Xyy { big, s1, s2 } => state.apply_xyy(big, s1, s2, beta, par),
        }
    }
}

/// A gate with its place in the schedule: the XY ring on level `level`, or
/// the XYY ring that pairs level `level - 1` with partners from `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduledGate {
    pub gate: MixerGate,
    pub level: usize,
    pub round: Round,
}

/// The gate sequence of one mixing layer, fixed by the layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixerCircuit {
    n_qubits: usize,
    gates: Vec<ScheduledGate>,
}

/// Ring pairs over a group of size `len`: odd round, even round, then the
/// wrap pair. Indices are positions within the group.
fn ring_pairs(len: usize) -> Vec<(usize, usize, Round)> {
    let mut out = Vec::new();
    if len < 2 {
        return out;
    }
    // 1-based i odd with i < len  ->  0-based (i-1, i)
    for i in (0..len - 1).step_by(2) {
        out.push((i, i + 1, Round::Odd));
    }
    for i in (1..len - 1).step_by(2) {
        out.push((i, i + 1, Round::Even));
    }
    out.push((len - 1, 0, Round::Wrap));
    out
}

impl MixerCircuit {
    pub fn new(layout: &QubitLayout) -> Result<Self> {
        let groups = &layout.groups;
        let mut gates = Vec::new();
        for (j, group) in groups.iter().enumerate() {
            for (x, y, round) in ring_pairs(group.len()) {
                gates.push(ScheduledGate { gate: MixerGate::Xy { a: group[x], b: group[y] }, level: j, round });
            }
        }
        for j in (1..groups.len()).rev() {
            let (small, big) = (&groups[j - 1], &groups[j]);
            if big.is_empty() {
                continue;
            }
            let mut k = 0;
            for (x, y, round) in ring_pairs(small.len()) {
                gates.push(ScheduledGate {
                    gate: MixerGate::Xyy { big: big[k], s1: small[x], s2: small[y] },
                    level: j,
                    round,
                });
                k = (k + 1) % big.len();
            }
        }
        let circuit = Self { n_qubits: layout.n_qubits(), gates };
        circuit.validate(layout)?;
        Ok(circuit)
    }

    /// Every gate acts on qubits whose values keep `Σ r(m)·bit_m` invariant.
    pub fn validate(&self, layout: &QubitLayout) -> Result<()> {
        let v = &layout.values;
        for g in &self.gates {
            if let Some(&q) = g.gate.qubits().iter().find(|&&q| q >= self.n_qubits) {
                return Err(QbError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
            }
            let ok = match g.gate {
                MixerGate::Xy { a, b } => a != b && v[a] == v[b],
                MixerGate::Xyy { big, s1, s2 } => s1 != s2 && v[s1] == v[s2] && v[big] == 2 * v[s1],
            };
            if !ok {
                return Err(QbError::InvalidGate(format!("{:?} does not conserve the weighted sum", g.gate)));
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[ScheduledGate] {
        &self.gates
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// One mixing layer `U_B(β)`.
    pub fn apply(&self, state: &mut StateVector, beta: f64, par: Parallelism) -> Result<()> {
        self.check_dim(state)?;
        for g in &self.gates {
            g.gate.apply(state, beta, par)?;
        }
        Ok(())
    }

    /// `U_B(β)†`: reversed gate order at angle `-β`.
    pub fn apply_adjoint(&self, state: &mut StateVector, beta: f64, par: Parallelism) -> Result<()> {
        self.check_dim(state)?;
        for g in self.gates.iter().rev() {
            g.gate.apply(state, -beta, par)?;
        }
        Ok(())
    }

    fn check_dim(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(QbError::DimensionMismatch { expected: self.n_qubits, got: state.n_qubits() });
        }
        Ok(())
    }

    /// Circuit depth when each gate is placed as early as its qubits allow.
    pub fn depth(&self) -> usize {
        asap_depth(self.gates.iter().map(|g| g.gate), self.n_qubits)
    }

    /// ASAP depth of the XY ring on level `level`.
    pub fn xy_stage_depth(&self, level: usize) -> usize {
        asap_depth(
            self.gates
                .iter()
                .filter(|g| g.level == level && matches!(g.gate, MixerGate::Xy { .. }))
                .map(|g| g.gate),
            self.n_qubits,
        )
    }

    /// ASAP depth of the XYY ring between levels `level - 1` and `level`.
    pub fn xyy_stage_depth(&self, level: usize) -> usize {
        asap_depth(
            self.gates
                .iter()
                .filter(|g| g.level == level && matches!(g.gate, MixerGate::Xyy { .. }))
                .map(|g| g.gate),
            self.n_qubits,
        )
    }
}

fn asap_depth(gates: impl Iterator<Item = MixerGate>, n_qubits: usize) -> usize {
    let mut busy = vec![0usize; n_qubits];
    let mut depth = 0;
    for g in gates {
        let qs = g.qubits();
        let t = qs.iter().map(|&q| busy[q]).max().unwrap_or(0) + 1;
        for q in qs {
            busy[q] = t;
        }
        depth = depth.max(t);
    }
    depth
}

/// Convenience wrapper building the schedule on the fly.
pub fn apply_mixing_layer(state: &mut StateVector, layout: &QubitLayout, beta: f64, par: Parallelism) -> Result<()> {
    MixerCircuit::new(layout)?.apply(state, beta, par)
}

/// Basis state `|encode_canonical(y0)⟩`; `y0` must be in bounds and sum to `sum`.
pub fn initial_state(layout: &QubitLayout, sum: u64, y0: &[u64]) -> Result<StateVector> {
    let total: u64 = y0.iter().sum();
    if total != sum {
        return Err(QbError::Infeasible(format!("initial allocation sums to {total}, expected {sum}")));
    }
    let bits = layout.encode_canonical(y0)?;
    StateVector::basis(layout.n_qubits(), bits)
}
