//! Dense statevector simulation of the phase separator and the ring mixer.

pub mod diagonal;
pub mod mixer;
pub mod state;

pub use diagonal::{apply_phase, portfolio_from_key, portfolio_key, precompute_diagonal, precompute_diagonal_capped, DiagonalCost, DEFAULT_QUBIT_CAP};
pub use mixer::{apply_mixing_layer, initial_state, MixerCircuit, MixerGate, Round, ScheduledGate};
pub use state::{StateVector, NORM_TOLERANCE};
