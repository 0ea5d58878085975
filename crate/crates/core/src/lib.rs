//! Quasi-binary encoded QAOA for bounded-integer quadratic programs with a
//! sum constraint, simulated on a dense statevector.
//!
//! The pipeline runs from market data to a solved portfolio:
//!
//! * [`market_data`]: price history ingestion, return moments and the
//!   closed-form mean-variance frontier relations.
//! * [`problem`]: the integer model, its shifted form, greedy feasible
//!   initialisation and exhaustive enumeration.
//! * [`encoding`]: the quasi-binary qubit layout with the mixer split rule.
//! * [`circuit`]: statevector, diagonal phase separation and the XY / XYY
//!   ring mixer.
//! * [`qaoa`]: estimators, the derivative-free optimizer and the four
//!   parameter schedulers.
//! * [`iterate`]: precision-increasing refinement of the discretisation.
//! * [`analysis`]: mixability analysis and reproducible experiment drivers.
//!
//! Bit convention: qubit `m` is bit `m` of the basis-state index (qubit 0 is
//! the least significant bit).

pub mod analysis;
pub mod circuit;
pub mod encoding;
pub mod error;
pub mod iterate;
pub mod market_data;
pub mod parallel;
pub mod problem;
pub mod qaoa;

pub use error::{QbError, Result};
