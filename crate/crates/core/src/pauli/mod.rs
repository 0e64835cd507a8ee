//! Qubit Pauli strings and the stabilizer tableau backend.

mod string;
mod tableau;

pub use string::{Letter, PauliString};
pub use tableau::{CliffordGate, StabilizerTableau};
