//! Dense state vectors over chains with heterogeneous local dimensions.

mod locality;
mod operator;
pub mod random;
mod state;

pub use locality::{locality_profile, truncate_unitary, LocalityProfile, UnitaryTruncation};
pub use operator::{clock, conditional_expectation, cz_power, matrix_power, polar_unitarize, shift, LocalOperator};
pub use state::{StateVector, DEFAULT_AMPLITUDE_BUDGET, ZERO_PROBABILITY};
