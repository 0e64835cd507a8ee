//! Finite-chain simulator for symmetry-protected topological states built
//! from finite-depth entanglers: string order, the cohomology index, blocked
//! charge measurements and measurement-induced long-range order.

pub mod circuit;
pub mod correlators;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod group;
pub mod measurement;
pub mod model;
pub mod pauli;

pub use error::{Result, SptError};
