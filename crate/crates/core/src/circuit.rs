//! Finite-depth circuits shared by the stabilizer and dense backends.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::dense::{cz_power, LocalOperator, StateVector};
use crate::error::{Result, SptError};
use crate::pauli::{CliffordGate, PauliString, StabilizerTableau};

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    Cz(usize, usize),
    Cnot { control: usize, target: usize },
    /// Chain-wide Pauli string (qubit chains only).
    Pauli(PauliString),
    /// `CZ^k` between two qudits of dimension `d`.
    CzPow { a: usize, b: usize, d: usize, k: i64 },
    Dense(LocalOperator),
}

impl Gate {
    pub fn sites(&self) -> Vec<usize> {
        match self {
            Gate::H(a) | Gate::S(a) | Gate::Sdg(a) => vec![*a],
            Gate::Cz(a, b) | Gate::CzPow { a, b, .. } => vec![*a, *b],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Pauli(p) => p.support(),
            Gate::Dense(op) => op.sites().to_vec(),
        }
    }

    /// Stabilizer form, when the gate is Clifford on qubits; `None` for the identity.
    pub fn to_clifford(&self) -> Result<Option<CliffordGate>> {
        Ok(Some(match self {
            Gate::H(a) => CliffordGate::H(*a),
            Gate::S(a) => CliffordGate::S(*a),
            Gate::Sdg(a) => CliffordGate::Sdg(*a),
            Gate::Cz(a, b) => CliffordGate::Cz(*a, *b),
            Gate::Cnot { control, target } => CliffordGate::Cnot {
                control: *control,
                target: *target,
            },
            Gate::Pauli(p) => CliffordGate::Pauli(p.clone()),
            Gate::CzPow { a, b, d: 2, k } if k.rem_euclid(2) == 1 => CliffordGate::Cz(*a, *b),
            Gate::CzPow { d: 2, .. } => return Ok(None),
            other => {
                return Err(SptError::Unsupported {
                    backend: "stabilizer",
                    what: format!("gate {other:?}"),
                })
            }
        }))
    }

    /// Dense form on a chain with the given site dimensions.
    pub fn to_local(&self, dims: &[usize]) -> Result<LocalOperator> {
        let h = 1.0 / 2f64.sqrt();
        let c = |re: f64, im: f64| C64::new(re, im);
        let single = |a: usize, m: DMatrix<C64>| -> Result<LocalOperator> {
            if dims.get(a) != Some(&2) {
                return Err(SptError::InvalidArgument(format!("site {a} is not a qubit")));
            }
            Ok(LocalOperator::single(a, m))
        };
        match self {
            Gate::H(a) => single(*a, DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])),
            Gate::S(a) => single(*a, DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)])),
            Gate::Sdg(a) => single(*a, DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)])),
            Gate::Cz(a, b) => Gate::CzPow { a: *a, b: *b, d: 2, k: 1 }.to_local(dims),
            Gate::Cnot { control, target } => {
                let m = DMatrix::from_fn(4, 4, |r, col| {
                    let image = if col >> 1 == 1 { col ^ 1 } else { col };
                    if r == image { c(1.0, 0.0) } else { c(0.0, 0.0) }
                });
                LocalOperator::from_unsorted(vec![*control, *target], vec![2, 2], m)
            }
            Gate::Pauli(p) => {
                if p.n_qubits() != dims.len() || dims.iter().any(|&d| d != 2) {
                    return Err(SptError::InvalidArgument("Pauli gate on a non-qubit chain".into()));
                }
                Ok(LocalOperator::from_chain_pauli(p))
            }
            Gate::CzPow { a, b, d, k } => {
                if dims.get(*a) != Some(d) || dims.get(*b) != Some(d) {
                    return Err(SptError::InvalidArgument(format!("CZ^{k} sites are not d={d} qudits")));
                }
                // symmetric in a and b, so the site order does not matter
                LocalOperator::from_unsorted(vec![*a, *b], vec![*d, *d], cz_power(*d, *k))
            }
            Gate::Dense(op) => Ok(op.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    dims: Vec<usize>,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(dims: Vec<usize>) -> Self {
        Self { dims, gates: Vec::new() }
    }

    pub fn with_gates(dims: Vec<usize>, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Self::new(dims);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        for s in gate.sites() {
            if s >= self.dims.len() {
                return Err(SptError::IndexOutOfRange {
                    what: "sites",
                    index: s,
                    len: self.dims.len(),
                });
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.dims != self.dims {
            return Err(SptError::InvalidArgument("circuits act on different chains".into()));
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn is_clifford(&self) -> bool {
        self.dims.iter().all(|&d| d == 2) && self.gates.iter().all(|g| g.to_clifford().is_ok())
    }

    pub fn apply_tableau(&self, t: &mut StabilizerTableau) -> Result<()> {
        for g in &self.gates {
            if let Some(cg) = g.to_clifford()? {
                t.apply(&cg)?;
            }
        }
        Ok(())
    }

    pub fn apply_dense(&self, s: &mut StateVector) -> Result<()> {
        if s.dims() != self.dims.as_slice() {
            return Err(SptError::InvalidArgument("state and circuit dims differ".into()));
        }
        for g in &self.gates {
            s.apply_local(&g.to_local(&self.dims)?)?;
        }
        Ok(())
    }

    /// Full unitary on the chain (small chains only).
    pub fn unitary(&self, budget: usize) -> Result<DMatrix<C64>> {
        let dim = StateVector::check_budget(&self.dims, budget)?;
        let mut u = DMatrix::<C64>::zeros(dim, dim);
        let ops: Vec<LocalOperator> = self.gates.iter().map(|g| g.to_local(&self.dims)).collect::<Result<_>>()?;
        for col in 0..dim {
            let mut s = StateVector::basis(self.dims.clone(), col)?;
            for op in &ops {
                s.apply_local(op)?;
            }
            for (r, a) in s.amplitudes().iter().enumerate() {
                u[(r, col)] = *a;
            }
        }
        Ok(u)
    }
}
