//! Mixability analysis and reproducible experiment drivers.

pub mod config;
pub mod experiment;
pub mod mixability;

pub use config::{ExperimentConfig, ExperimentKind, OneOrMany};
pub use experiment::{build_problem, load_moments, mean_ci95, qubit_sweep, risk_factor, run_experiment, solve, Interval};
pub use mixability::{beta_grid, mixability_matrix, mixability_matrix_capped, reciprocity_pair, MixabilityMatrix};
