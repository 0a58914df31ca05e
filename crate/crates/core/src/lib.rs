//! Stochastic phase-space simulation of arrays of two-photon driven,
//! two-photon damped resonators coupled by non-reciprocal hopping.
//!
//! The crate provides positive-P and gauge-P trajectory ensembles, the
//! estimators and diagnostics computed from them, momentum-space
//! correlation analysis, density-matrix reconstruction from phase-space
//! samples, and an exact truncated Fock-space master-equation solver used
//! as the reference for all stochastic results.

pub mod error;
pub mod estimators;
pub mod model;
pub mod momentum;
pub mod oracle;
pub mod reconstruction;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
pub use model::{Boundary, Decomposition, Gauge, ModelParams, PhasePoint, SchemeSpec};
pub use num_complex::Complex64 as C64;
