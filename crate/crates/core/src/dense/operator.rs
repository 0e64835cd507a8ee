use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Result, SptError};
use crate::group::{max_abs_diff, root_of_unity};
use crate::pauli::PauliString;

/// Matrix acting on a sorted list of sites; identity elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    sites: Vec<usize>,
    dims: Vec<usize>,
    matrix: DMatrix<C64>,
}

/// Row-major mixed-radix digits of `index`.
pub(crate) fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

impl LocalOperator {
    pub fn new(sites: Vec<usize>, dims: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        if sites.len() != dims.len() {
            return Err(SptError::InvalidArgument(format!(
                "{} sites but {} local dimensions",
                sites.len(),
                dims.len()
            )));
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SptError::InvalidArgument(format!(
                "sites must be strictly increasing, got {sites:?}"
            )));
        }
        let dim: usize = dims.iter().product();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(SptError::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        Ok(Self { sites, dims, matrix })
    }

    /// Unsorted site lists are permuted into increasing order.
    pub fn from_unsorted(sites: Vec<usize>, dims: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let mut order: Vec<usize> = (0..sites.len()).collect();
        order.sort_by_key(|&k| sites[k]);
        if order.iter().enumerate().all(|(a, &b)| a == b) {
            return Self::new(sites, dims, matrix);
        }
        let new_sites: Vec<usize> = order.iter().map(|&k| sites[k]).collect();
        let new_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
        let dim: usize = dims.iter().product();
        // index in the old ordering for every index in the new ordering
        let perm: Vec<usize> = (0..dim)
            .map(|i| {
                let dn = digits(i, &new_dims);
                let mut old = vec![0; sites.len()];
                for (pos, &k) in order.iter().enumerate() {
                    old[k] = dn[pos];
                }
                old.iter().zip(&dims).fold(0, |acc, (&x, &d)| acc * d + x)
            })
            .collect();
        let m = DMatrix::from_fn(dim, dim, |r, c| matrix[(perm[r], perm[c])]);
        Self::new(new_sites, new_dims, m)
    }

    pub fn identity() -> Self {
        Self {
            sites: Vec::new(),
            dims: Vec::new(),
            matrix: DMatrix::identity(1, 1),
        }
    }

    pub fn scalar(c: C64) -> Self {
        Self {
            sites: Vec::new(),
            dims: Vec::new(),
            matrix: DMatrix::from_element(1, 1, c),
        }
    }

    pub fn single(site: usize, matrix: DMatrix<C64>) -> Self {
        let d = matrix.nrows();
        Self::new(vec![site], vec![d], matrix).expect("square single-site matrix")
    }

    /// Pauli string placed on `sites` (in order), qubit dimension 2.
    pub fn from_pauli(p: &PauliString, sites: &[usize]) -> Result<Self> {
        if p.n_qubits() != sites.len() {
            return Err(SptError::DimensionMismatch {
                expected: sites.len(),
                got: p.n_qubits(),
            });
        }
        Self::from_unsorted(sites.to_vec(), vec![2; sites.len()], p.to_matrix())
    }

    /// A chain-wide Pauli string restricted to its support.
    pub fn from_chain_pauli(p: &PauliString) -> Self {
        let support = p.support();
        let restricted = p.restrict(&support);
        Self::from_pauli(&restricted, &support).expect("support matches")
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim_of(&self, site: usize) -> Option<usize> {
        self.sites.iter().position(|&s| s == site).map(|k| self.dims[k])
    }

    pub fn adjoint(&self) -> Self {
        Self {
            sites: self.sites.clone(),
            dims: self.dims.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            sites: self.sites.clone(),
            dims: self.dims.clone(),
            matrix: &self.matrix * c,
        }
    }

    /// Same operator written on a superset of sites, identity on the new ones.
    pub fn extend_to(&self, sites: &[usize], dims: &[usize]) -> Result<Self> {
        if sites == self.sites.as_slice() {
            return Ok(self.clone());
        }
        let mut pos = Vec::with_capacity(self.sites.len());
        for (k, s) in self.sites.iter().enumerate() {
            let Some(p) = sites.iter().position(|t| t == s) else {
                return Err(SptError::InvalidArgument(format!(
                    "site {s} is not in the target site list"
                )));
            };
            if dims[p] != self.dims[k] {
                return Err(SptError::DimensionMismatch {
                    expected: self.dims[k],
                    got: dims[p],
                });
            }
            pos.push(p);
        }
        let dim: usize = dims.iter().product();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        let inner: Vec<usize> = pos.iter().map(|&p| dims[p]).collect();
        for c in 0..dim {
            let dc = digits(c, dims);
            let ic = pos.iter().fold(0, |acc, &p| acc * dims[p] + dc[p]);
            for ir in 0..self.dim() {
                let v = self.matrix[(ir, ic)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let dr = digits(ir, &inner);
                let mut full = dc.clone();
                for (k, &p) in pos.iter().enumerate() {
                    full[p] = dr[k];
                }
                let r = full.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x);
                m[(r, c)] = v;
            }
        }
        Self::new(sites.to_vec(), dims.to_vec(), m)
    }

    /// Union of two site lists with their dimensions.
    fn union(&self, other: &Self) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut pairs: Vec<(usize, usize)> = self.sites.iter().copied().zip(self.dims.iter().copied()).collect();
        for (s, d) in other.sites.iter().zip(&other.dims) {
            match pairs.iter().find(|(t, _)| t == s) {
                Some((_, e)) if e != d => {
                    return Err(SptError::DimensionMismatch { expected: *e, got: *d });
                }
                Some(_) => {}
                None => pairs.push((*s, *d)),
            }
        }
        pairs.sort();
        Ok(pairs.into_iter().unzip())
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let (sites, dims) = self.union(other)?;
        let a = self.extend_to(&sites, &dims)?;
        let b = other.extend_to(&sites, &dims)?;
        Self::new(sites, dims, a.matrix * b.matrix)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (sites, dims) = self.union(other)?;
        let a = self.extend_to(&sites, &dims)?;
        let b = other.extend_to(&sites, &dims)?;
        Self::new(sites, dims, a.matrix + b.matrix)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Largest singular value.
    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        crate::group::unitarity_deviation(&self.matrix) <= tol
    }

    /// Max-entry distance to `other` after extending both to a common support.
    pub fn max_diff(&self, other: &Self) -> Result<f64> {
        let (sites, dims) = self.union(other)?;
        let a = self.extend_to(&sites, &dims)?;
        let b = other.extend_to(&sites, &dims)?;
        Ok(max_abs_diff(&a.matrix, &b.matrix))
    }

    /// Drops sites on which the operator acts as a multiple of identity, within `tol`.
    pub fn trim(&self, tol: f64) -> Self {
        let mut op = self.clone();
        for &s in self.sites.iter() {
            let rest: Vec<usize> = op.sites.iter().copied().filter(|&t| t != s).collect();
            let reduced = conditional_expectation(&op, &rest);
            if let Ok(back) = reduced.extend_to(&op.sites, &op.dims) {
                if max_abs_diff(&back.matrix, &op.matrix) <= tol {
                    op = reduced;
                }
            }
        }
        op
    }
}

pub(crate) fn op_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Normalized partial trace onto `x ∩ sites(op)`; the result acts as the
/// identity on sites of `x` outside the operator's support.
pub fn conditional_expectation(op: &LocalOperator, x: &[usize]) -> LocalOperator {
    let keep: Vec<usize> = (0..op.sites.len()).filter(|&k| x.contains(&op.sites[k])).collect();
    let trace: Vec<usize> = (0..op.sites.len()).filter(|k| !keep.contains(k)).collect();
    let kdims: Vec<usize> = keep.iter().map(|&k| op.dims[k]).collect();
    let kdim: usize = kdims.iter().product();
    let tdim: usize = trace.iter().map(|&k| op.dims[k]).product();
    let dim = op.dim();
    let split: Vec<(usize, usize)> = (0..dim)
        .map(|i| {
            let d = digits(i, &op.dims);
            let ki = keep.iter().fold(0, |acc, &k| acc * op.dims[k] + d[k]);
            let ti = trace.iter().fold(0, |acc, &k| acc * op.dims[k] + d[k]);
            (ki, ti)
        })
        .collect();
    let mut m = DMatrix::<C64>::zeros(kdim, kdim);
    for (i, &(ki, ti)) in split.iter().enumerate() {
        for (j, &(kj, tj)) in split.iter().enumerate() {
            if ti == tj {
                m[(ki, kj)] += op.matrix[(i, j)];
            }
        }
    }
    m /= C64::new(tdim as f64, 0.0);
    LocalOperator {
        sites: keep.iter().map(|&k| op.sites[k]).collect(),
        dims: kdims,
        matrix: m,
    }
}

/// Polar unitary part `T_r = U V†` of `op = U Σ V†` and `‖op − T_r‖`.
pub fn polar_unitarize(op: &LocalOperator) -> Result<(LocalOperator, f64)> {
    let svd = op.matrix.clone().svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if smin < 1e-12 {
        return Err(SptError::NotUnitarizable(smin));
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let distance = svd
        .singular_values
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    let t = LocalOperator {
        sites: op.sites.clone(),
        dims: op.dims.clone(),
        matrix: u * v_t,
    };
    Ok((t, distance))
}

/// Qudit shift `X|b⟩ = |b+1⟩`.
pub fn shift(d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |r, c| {
        if r == (c + 1) % d {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Qudit clock `Z|b⟩ = ω^b|b⟩`, `ω = e^{2πi/d}`.
pub fn clock(d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            root_of_unity(r as i64, d as u64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `CZ^k |a,b⟩ = ω^{k a b} |a,b⟩` on two qudits.
pub fn cz_power(d: usize, k: i64) -> DMatrix<C64> {
    DMatrix::from_fn(d * d, d * d, |r, c| {
        if r == c {
            let (a, b) = (r / d, r % d);
            root_of_unity(k * (a * b) as i64, d as u64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn matrix_power(m: &DMatrix<C64>, k: i64) -> DMatrix<C64> {
    let base = if k < 0 { m.adjoint() } else { m.clone() };
    let mut acc = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k.unsigned_abs() {
        acc = &acc * &base;
    }
    acc
}
