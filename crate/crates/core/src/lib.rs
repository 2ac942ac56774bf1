//! Uncertainty quantification for finite-state stochastic agent systems.
//!
//! The crate models an agent interacting with an environment as a
//! turn-based stochastic process, samples and enumerates its trajectories,
//! and decomposes their uncertainty turn by turn. See [`uq`] for the
//! aggregators and [`scenario`] for the built-in systems.

pub mod classifier;
pub mod dist;
pub mod error;
pub mod eval;
pub mod measures;
pub mod model;
pub mod scenario;
pub mod uq;

pub use dist::Dist;
pub use error::{Result, UqError};
