use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::operator::{digits, LocalOperator};
use crate::error::{Result, SptError};
use crate::group::max_abs_diff;

/// Largest state vector the dense backend will allocate by default.
pub const DEFAULT_AMPLITUDE_BUDGET: usize = 1 << 20;

/// Probabilities below this are treated as impossible outcomes.
pub const ZERO_PROBABILITY: f64 = 1e-12;

/// Dense amplitudes over a chain with per-site dimensions; site 0 is the
/// most significant digit of the basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if amps.len() != dim {
            return Err(SptError::DimensionMismatch {
                expected: dim,
                got: amps.len(),
            });
        }
        Ok(Self { dims, amps })
    }

    pub fn check_budget(dims: &[usize], budget: usize) -> Result<usize> {
        let needed = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if needed > budget {
            return Err(SptError::BudgetExceeded { needed, budget });
        }
        Ok(needed)
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let dim: usize = Self::check_budget(&dims, DEFAULT_AMPLITUDE_BUDGET)?;
        if index >= dim {
            return Err(SptError::IndexOutOfRange {
                what: "basis states",
                index,
                len: dim,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { dims, amps })
    }

    /// Tensor product of normalized single-site vectors.
    pub fn product(locals: &[Vec<C64>], budget: usize) -> Result<Self> {
        let dims: Vec<usize> = locals.iter().map(Vec::len).collect();
        let dim = Self::check_budget(&dims, budget)?;
        let amps = (0..dim)
            .map(|i| {
                digits(i, &dims)
                    .iter()
                    .zip(locals)
                    .map(|(&k, v)| v[k])
                    .product()
            })
            .collect();
        Ok(Self { dims, amps })
    }

    /// Uniform superposition on every site.
    pub fn uniform(dims: Vec<usize>, budget: usize) -> Result<Self> {
        let locals: Vec<Vec<C64>> = dims
            .iter()
            .map(|&d| vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d])
            .collect();
        Self::product(&locals, budget)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
        n
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dims != other.dims {
            return Err(SptError::InvalidArgument("states live on different chains".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn scale(&mut self, c: C64) {
        for a in &mut self.amps {
            *a *= c;
        }
    }

    pub fn add_scaled(&mut self, other: &Self, c: C64) -> Result<()> {
        if self.dims != other.dims {
            return Err(SptError::InvalidArgument("states live on different chains".into()));
        }
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
        Ok(())
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    /// Flat offsets of every configuration of `sites` (row-major over them).
    fn offsets(&self, sites: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let dims: Vec<usize> = sites.iter().map(|&s| self.dims[s]).collect();
        let dim: usize = dims.iter().product();
        (0..dim)
            .map(|i| {
                digits(i, &dims)
                    .iter()
                    .zip(sites)
                    .map(|(&x, &s)| x * strides[s])
                    .sum()
            })
            .collect()
    }

    fn complement(&self, sites: &[usize]) -> Vec<usize> {
        (0..self.dims.len()).filter(|s| !sites.contains(s)).collect()
    }

    fn check_op(&self, op: &LocalOperator) -> Result<()> {
        for (&s, &d) in op.sites().iter().zip(op.dims()) {
            if s >= self.dims.len() {
                return Err(SptError::IndexOutOfRange {
                    what: "sites",
                    index: s,
                    len: self.dims.len(),
                });
            }
            if self.dims[s] != d {
                return Err(SptError::DimensionMismatch {
                    expected: self.dims[s],
                    got: d,
                });
            }
        }
        Ok(())
    }

    /// In-place tensor action of `op`; the result is not renormalized.
    pub fn apply_local(&mut self, op: &LocalOperator) -> Result<()> {
        self.check_op(op)?;
        let inner = self.offsets(op.sites());
        let outer = self.offsets(&self.complement(op.sites()));
        let m = op.matrix();
        let diagonal = m.iter().enumerate().all(|(k, z)| k % (m.nrows() + 1) == 0 || *z == C64::new(0.0, 0.0));
        let mut buf = vec![C64::new(0.0, 0.0); inner.len()];
        for base in outer {
            if diagonal {
                for (k, &off) in inner.iter().enumerate() {
                    self.amps[base + off] *= m[(k, k)];
                }
                continue;
            }
            for (k, &off) in inner.iter().enumerate() {
                buf[k] = self.amps[base + off];
            }
            for (r, &off) in inner.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (c, b) in buf.iter().enumerate() {
                    acc += m[(r, c)] * b;
                }
                self.amps[base + off] = acc;
            }
        }
        Ok(())
    }

    pub fn applied(&self, op: &LocalOperator) -> Result<Self> {
        let mut s = self.clone();
        s.apply_local(op)?;
        Ok(s)
    }

    /// `⟨ψ|op|ψ⟩`.
    pub fn expectation(&self, op: &LocalOperator) -> Result<C64> {
        let phi = self.applied(op)?;
        self.inner(&phi)
    }

    /// Born probability and normalized post-measurement state.
    pub fn apply_projector(&self, proj: &LocalOperator) -> Result<(f64, Self)> {
        let m = proj.matrix();
        let dev = max_abs_diff(&(m * m), m).max(max_abs_diff(&m.adjoint(), m));
        if dev > 1e-10 {
            return Err(SptError::NotAProjector(dev));
        }
        let mut post = self.applied(proj)?;
        let prob = post.norm().powi(2);
        if prob < ZERO_PROBABILITY {
            return Err(SptError::ZeroProbabilityOutcome(prob));
        }
        post.scale(C64::new(1.0 / prob.sqrt(), 0.0));
        Ok((prob, post))
    }

    /// Amplitudes as a matrix with rows indexed by `rows` and columns by
    /// `cols` (both row-major in the given site order). Sites in neither
    /// list must not exist.
    pub fn reshape(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<C64>> {
        if rows.len() + cols.len() != self.dims.len() {
            return Err(SptError::InvalidArgument(
                "row and column sites must partition the chain".into(),
            ));
        }
        let ro = self.offsets(rows);
        let co = self.offsets(cols);
        Ok(DMatrix::from_fn(ro.len(), co.len(), |r, c| self.amps[ro[r] + co[c]]))
    }

    /// Reduced density matrix on `sites` (in the given order).
    pub fn reduced_density(&self, sites: &[usize]) -> Result<DMatrix<C64>> {
        let rest = self.complement(sites);
        let m = self.reshape(sites, &rest)?;
        Ok(&m * m.adjoint())
    }

    pub fn as_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.amps)
    }

    /// Max-entry distance after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &Self) -> Result<f64> {
        let ov = self.inner(other)?;
        let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a * ph - b).norm())
            .fold(0.0, f64::max))
    }
}
