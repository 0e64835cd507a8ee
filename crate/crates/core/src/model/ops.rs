use std::collections::BTreeSet;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dense::{LocalOperator, StateVector};
use crate::error::{Result, SptError};
use crate::pauli::{PauliString, StabilizerTableau};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Stabilizer,
    Dense,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Stabilizer => "stabilizer",
            Backend::Dense => "dense",
        }
    }
}

/// A pure state on either backend.
#[derive(Clone, Debug)]
pub enum ChainState {
    Stabilizer(StabilizerTableau),
    Dense(StateVector),
}

impl ChainState {
    pub fn backend(&self) -> Backend {
        match self {
            ChainState::Stabilizer(_) => Backend::Stabilizer,
            ChainState::Dense(_) => Backend::Dense,
        }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            ChainState::Stabilizer(t) => t.n_qubits(),
            ChainState::Dense(s) => s.n_sites(),
        }
    }

    pub fn as_tableau(&self) -> Option<&StabilizerTableau> {
        match self {
            ChainState::Stabilizer(t) => Some(t),
            ChainState::Dense(_) => None,
        }
    }

    pub fn as_dense(&self) -> Option<&StateVector> {
        match self {
            ChainState::Dense(s) => Some(s),
            ChainState::Stabilizer(_) => None,
        }
    }

    /// `⟨ψ|O|ψ⟩`. Non-Hermitian Pauli strings are handled through their phase.
    pub fn expectation(&self, op: &ChainOperator) -> Result<C64> {
        match (self, op) {
            (ChainState::Stabilizer(t), ChainOperator::Pauli(p)) => {
                let v = t.expectation(&p.strip_phase())?;
                Ok(p.phase_value() * v as f64)
            }
            (ChainState::Stabilizer(_), ChainOperator::Dense(_)) => Err(SptError::Unsupported {
                backend: "stabilizer",
                what: "expectation of a dense operator".into(),
            }),
            (ChainState::Dense(s), op) => {
                let phi = op.apply_dense(s)?;
                s.inner(&phi)
            }
        }
    }
}

/// Operator on the chain: an exact Pauli string, or an ordered product of
/// dense local factors (leftmost factor acts last).
#[derive(Clone, Debug, PartialEq)]
pub enum ChainOperator {
    Pauli(PauliString),
    Dense(Vec<LocalOperator>),
}

impl ChainOperator {
    pub fn dense(op: LocalOperator) -> Self {
        ChainOperator::Dense(vec![op])
    }

    pub fn identity_like(&self) -> Self {
        match self {
            ChainOperator::Pauli(p) => ChainOperator::Pauli(PauliString::identity(p.n_qubits())),
            ChainOperator::Dense(_) => ChainOperator::Dense(Vec::new()),
        }
    }

    pub fn as_pauli(&self) -> Option<&PauliString> {
        match self {
            ChainOperator::Pauli(p) => Some(p),
            ChainOperator::Dense(_) => None,
        }
    }

    /// Sites touched by a non-identity factor.
    pub fn support(&self) -> Vec<usize> {
        match self {
            ChainOperator::Pauli(p) => p.support(),
            ChainOperator::Dense(fs) => {
                let set: BTreeSet<usize> = fs.iter().flat_map(|f| f.sites().iter().copied()).collect();
                set.into_iter().collect()
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            ChainOperator::Pauli(p) => p.is_identity() && p.phase() == 0,
            ChainOperator::Dense(fs) => fs.is_empty(),
        }
    }

    /// `self · other`; mixing a Pauli with dense factors converts the Pauli.
    pub fn mul(&self, other: &ChainOperator) -> Result<ChainOperator> {
        Ok(match (self, other) {
            (ChainOperator::Pauli(a), ChainOperator::Pauli(b)) => {
                if a.n_qubits() != b.n_qubits() {
                    return Err(SptError::DimensionMismatch {
                        expected: a.n_qubits(),
                        got: b.n_qubits(),
                    });
                }
                ChainOperator::Pauli(a.mul(b))
            }
            (a, b) => {
                let mut fs = a.to_factors();
                fs.extend(b.to_factors());
                ChainOperator::Dense(fs)
            }
        })
    }

    pub fn adjoint(&self) -> ChainOperator {
        match self {
            ChainOperator::Pauli(p) => ChainOperator::Pauli(p.adjoint()),
            ChainOperator::Dense(fs) => ChainOperator::Dense(fs.iter().rev().map(LocalOperator::adjoint).collect()),
        }
    }

    pub fn scale(&self, c: C64) -> Result<ChainOperator> {
        match self {
            ChainOperator::Pauli(p) => {
                for k in 0..4u8 {
                    if (p.with_phase(p.phase() + k).phase_value() - p.phase_value() * c).norm() < 1e-12 {
                        return Ok(ChainOperator::Pauli(p.with_phase(p.phase() + k)));
                    }
                }
                Ok(ChainOperator::Dense(vec![
                    LocalOperator::scalar(c),
                    LocalOperator::from_chain_pauli(p),
                ]))
            }
            ChainOperator::Dense(fs) => {
                let mut fs = fs.clone();
                fs.insert(0, LocalOperator::scalar(c));
                Ok(ChainOperator::Dense(fs))
            }
        }
    }

    pub fn to_factors(&self) -> Vec<LocalOperator> {
        match self {
            ChainOperator::Pauli(p) => vec![LocalOperator::from_chain_pauli(p)],
            ChainOperator::Dense(fs) => fs.clone(),
        }
    }

    /// Collapses all factors into a single local operator on their joint support.
    pub fn to_local(&self) -> Result<LocalOperator> {
        let mut acc = LocalOperator::identity();
        for f in self.to_factors() {
            acc = acc.mul(&f)?;
        }
        Ok(acc)
    }

    pub fn apply_dense(&self, s: &StateVector) -> Result<StateVector> {
        let mut out = s.clone();
        for f in self.to_factors().iter().rev() {
            out.apply_local(f)?;
        }
        Ok(out)
    }

    /// `U A U†` where `U = self` is a product of factors on pairwise disjoint
    /// sites; only factors overlapping `A` contribute.
    pub fn conjugate(&self, a: &ChainOperator) -> Result<ChainOperator> {
        match (self, a) {
            (ChainOperator::Pauli(u), ChainOperator::Pauli(p)) => {
                let sign = if u.commutes(p) { 0 } else { 2 };
                Ok(ChainOperator::Pauli(p.with_phase(p.phase() + sign)))
            }
            (u, a) => {
                let a_local = a.to_local()?;
                let support: BTreeSet<usize> = a_local.sites().iter().copied().collect();
                let mut relevant = LocalOperator::identity();
                for f in u.to_factors() {
                    if f.sites().iter().any(|s| support.contains(s)) {
                        relevant = relevant.mul(&f)?;
                    }
                }
                let out = relevant.mul(&a_local)?.mul(&relevant.adjoint())?;
                Ok(ChainOperator::dense(out))
            }
        }
    }
}
