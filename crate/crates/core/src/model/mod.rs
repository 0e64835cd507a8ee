//! Cluster-type SPT chains: construction, half-chain symmetries, boundary
//! operators `W`, string order and the cocycle/index.
//!
//! Sites are grouped in cells of two: cell `c` holds the odd subsite `2c`
//! and the even subsite `2c + 1`. Group elements are `(g, h)` with `g` the
//! measured part acting on even subsites and `h` acting on odd subsites.

mod boundary;
mod ops;

pub use boundary::{cocycle_mu, cocycle_table, extract_w, sigma, sigma_at, solve_w_dense, string_order, BoundaryOperator, WSource};
pub use ops::{Backend, ChainOperator, ChainState};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::dense::{clock, matrix_power, shift, LocalOperator, StateVector, DEFAULT_AMPLITUDE_BUDGET};
use crate::error::{Result, SptError};
use crate::group::{CellOperator, FiniteAbelianGroup, OnSiteRepresentation, ProductElement, ProductGroup};
use crate::pauli::{Letter, PauliString, StabilizerTableau};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    ClusterQubit,
    ClusterQudit { d: usize },
    /// Product state with no entangler.
    Trivial { d: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelOptions {
    pub backend: Backend,
    pub boundary: Boundary,
    pub amplitude_budget: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Stabilizer,
            boundary: Boundary::Open,
            amplitude_budget: DEFAULT_AMPLITUDE_BUDGET,
        }
    }
}

impl ModelOptions {
    pub fn dense() -> Self {
        Self {
            backend: Backend::Dense,
            ..Self::default()
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }
}

#[derive(Clone, Debug)]
pub struct SptModel {
    kind: ModelKind,
    n_cells: usize,
    d: usize,
    boundary: Boundary,
    backend: Backend,
    entangler: Circuit,
    radius: usize,
    group: ProductGroup,
    rep: OnSiteRepresentation,
    /// Largest cut window, in cells, tried by dense `W` extraction.
    pub max_window_cells: usize,
}

pub const CELL_SIZE: usize = 2;

/// Clock/shift generators `[X_e, X_o]` of the cell representation.
fn qudit_cell_generators(d: usize) -> [DMatrix<C64>; 2] {
    let id = DMatrix::<C64>::identity(d, d);
    [id.kronecker(&shift(d)), shift(d).kronecker(&id)]
}

impl SptModel {
    fn assemble(kind: ModelKind, n_cells: usize, opts: ModelOptions) -> Result<Self> {
        let d = match kind {
            ModelKind::ClusterQubit => 2,
            ModelKind::ClusterQudit { d } | ModelKind::Trivial { d } => d,
        };
        if d < 2 {
            return Err(SptError::InvalidArgument(format!("local dimension {d} < 2")));
        }
        let radius = match kind {
            ModelKind::Trivial { .. } => 0,
            _ => 1,
        };
        if n_cells < 2 * radius + 2 {
            return Err(SptError::ChainTooShort(format!(
                "{n_cells} cells leave no bulk cut for radius {radius}"
            )));
        }
        if opts.backend == Backend::Stabilizer && d != 2 {
            return Err(SptError::Unsupported {
                backend: "stabilizer",
                what: format!("qudits of dimension {d}"),
            });
        }
        let n_sites = n_cells * CELL_SIZE;
        let dims = vec![d; n_sites];
        if opts.backend == Backend::Dense {
            StateVector::check_budget(&dims, opts.amplitude_budget)?;
        }
        let mut entangler = Circuit::new(dims);
        if !matches!(kind, ModelKind::Trivial { .. }) {
            let bonds = match opts.boundary {
                Boundary::Open => n_sites - 1,
                Boundary::Periodic => n_sites,
            };
            for k in 0..bonds {
                let (a, b) = (k, (k + 1) % n_sites);
                // alternating CZ / CZ† so that symmetry strings telescope
                let power = if k % 2 == 0 { 1 } else { -1 };
                let gate = if d == 2 {
                    Gate::Cz(a, b)
                } else {
                    Gate::CzPow { a, b, d, k: power }
                };
                entangler.push(gate)?;
            }
        }
        let zd = FiniteAbelianGroup::cyclic(d as u32)?;
        let group = ProductGroup::new(zd.clone(), zd);
        let flat = group.flat();
        let rep = if d == 2 {
            OnSiteRepresentation::from_generators(
                flat,
                vec![
                    CellOperator::Pauli("IX".parse()?),
                    CellOperator::Pauli("XI".parse()?),
                ],
            )?
        } else {
            let [xe, xo] = qudit_cell_generators(d);
            OnSiteRepresentation::from_generators(flat, vec![CellOperator::Dense(xe), CellOperator::Dense(xo)])?
        };
        Ok(Self {
            kind,
            n_cells,
            d,
            boundary: opts.boundary,
            backend: opts.backend,
            entangler,
            radius,
            group,
            rep,
            max_window_cells: 2 * radius + 1,
        })
    }

    /// Prepared state: uniform superposition followed by the entangler.
    pub fn prepare(&self) -> Result<ChainState> {
        match self.backend {
            Backend::Stabilizer => {
                let mut t = StabilizerTableau::plus_state(self.n_sites());
                self.entangler.apply_tableau(&mut t)?;
                Ok(ChainState::Stabilizer(t))
            }
            Backend::Dense => {
                let mut s = StateVector::uniform(self.site_dims(), usize::MAX)?;
                self.entangler.apply_dense(&mut s)?;
                s.normalize();
                Ok(ChainState::Dense(s))
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_sites(&self) -> usize {
        self.n_cells * CELL_SIZE
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn site_dims(&self) -> Vec<usize> {
        vec![self.d; self.n_sites()]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn entangler(&self) -> &Circuit {
        &self.entangler
    }

    /// Light-cone radius `N` of the entangler, in cells.
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn group(&self) -> &ProductGroup {
        &self.group
    }

    pub fn representation(&self) -> &OnSiteRepresentation {
        &self.rep
    }

    /// Representation of the measured subgroup `G` alone.
    pub fn measured_representation(&self) -> Result<OnSiteRepresentation> {
        self.rep.restrict_leading(&self.group.g_part)
    }

    pub fn cell_sites(&self, cell: usize) -> [usize; 2] {
        [CELL_SIZE * cell, CELL_SIZE * cell + 1]
    }

    pub fn odd_site(&self, cell: usize) -> usize {
        CELL_SIZE * cell
    }

    pub fn even_site(&self, cell: usize) -> usize {
        CELL_SIZE * cell + 1
    }

    pub fn sites_of(&self, cells: &[usize]) -> Vec<usize> {
        let mut s: Vec<usize> = cells.iter().flat_map(|&c| self.cell_sites(c)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn cell_of(&self, site: usize) -> usize {
        site / CELL_SIZE
    }

    /// Cells where a half-chain symmetry leaves its far-edge term.
    pub fn far_cells(&self, side: Side) -> Vec<usize> {
        let n = self.radius.max(1);
        let l = self.n_cells;
        match (self.boundary, side) {
            (Boundary::Open, Side::Right) => (l - n..l).collect(),
            (Boundary::Open, Side::Left) => (0..n).collect(),
            (Boundary::Periodic, _) => {
                let mut c: Vec<usize> = (0..n).chain(l - n..l).collect();
                c.sort_unstable();
                c.dedup();
                c
            }
        }
    }

    /// Cells `[j−N, j+N]` around cut `j`, with the last cell dropped when it
    /// is a far-edge cell. Errors when `[j−N, j+N)` leaves the chain or
    /// touches the far edge.
    pub fn cut_window(&self, j: usize, side: Side) -> Result<Vec<usize>> {
        let n = self.radius;
        if j < n + 1 || j + n > self.n_cells {
            return Err(SptError::InvalidArgument(format!(
                "cut {j} is not in the bulk of a {}-cell chain",
                self.n_cells
            )));
        }
        let far = self.far_cells(side);
        let core: Vec<usize> = (j - n..j + n).collect();
        if core.iter().any(|c| far.contains(c)) {
            return Err(SptError::InvalidArgument(format!(
                "cut {j} is within the boundary margin of the {side:?} half-chain"
            )));
        }
        let mut window = core;
        if j + n < self.n_cells && !far.contains(&(j + n)) {
            window.push(j + n);
        }
        Ok(window)
    }

    /// Cuts accepted by [`Self::cut_window`] on both sides.
    pub fn bulk_cuts(&self) -> Vec<usize> {
        (0..self.n_cells)
            .filter(|&j| self.cut_window(j, Side::Left).is_ok() && self.cut_window(j, Side::Right).is_ok())
            .collect()
    }

    pub fn element(&self, g: u32, h: u32) -> Result<ProductElement> {
        self.group.element(vec![g], vec![h])
    }

    /// `U_𝔤` on one cell.
    pub fn symmetry_cell(&self, e: &ProductElement, cell: usize) -> Result<ChainOperator> {
        if cell >= self.n_cells {
            return Err(SptError::IndexOutOfRange {
                what: "cells",
                index: cell,
                len: self.n_cells,
            });
        }
        let flat = self.group.to_flat(e);
        let sites = self.cell_sites(cell);
        match (self.backend, self.rep.get(&flat)) {
            (Backend::Stabilizer, CellOperator::Pauli(p)) => Ok(ChainOperator::Pauli(p.embed(self.n_sites(), &sites))),
            (_, op) => Ok(ChainOperator::dense(LocalOperator::new(
                sites.to_vec(),
                vec![self.d; CELL_SIZE],
                op.to_dense(),
            )?)),
        }
    }

    /// `⊗_{c ∈ cells} U_𝔤^{(c)}`.
    pub fn symmetry_on_cells(&self, e: &ProductElement, cells: impl IntoIterator<Item = usize>) -> Result<ChainOperator> {
        let mut acc = self.identity_operator();
        if self.group.is_identity(e) {
            return Ok(acc);
        }
        for c in cells {
            acc = acc.mul(&self.symmetry_cell(e, c)?)?;
        }
        Ok(acc)
    }

    pub fn identity_operator(&self) -> ChainOperator {
        match self.backend {
            Backend::Stabilizer => ChainOperator::Pauli(PauliString::identity(self.n_sites())),
            Backend::Dense => ChainOperator::Dense(Vec::new()),
        }
    }

    pub fn global_symmetry(&self, e: &ProductElement) -> Result<ChainOperator> {
        self.symmetry_on_cells(e, 0..self.n_cells)
    }

    /// `U_𝔤` on cells `[j, L)` (right) or `[0, j)` (left), truncated at the
    /// chain's end.
    pub fn half_chain_symmetry(&self, e: &ProductElement, j: usize, side: Side) -> Result<ChainOperator> {
        if j > self.n_cells {
            return Err(SptError::IndexOutOfRange {
                what: "cuts",
                index: j,
                len: self.n_cells + 1,
            });
        }
        match side {
            Side::Right => self.symmetry_on_cells(e, j..self.n_cells),
            Side::Left => self.symmetry_on_cells(e, 0..j),
        }
    }

    /// Closed-form boundary operators of the cluster chains: with
    /// `(a, b) = (h, g)`, `W^{R_j} = (Z_e^{(j−1)})^{a} (Z_o^{(j)})^{−b}` and
    /// `W^{L_i} = (Z_e^{(i−1)})^{−a} (Z_o^{(i)})^{b}`; the trivial model has
    /// `W = 1`.
    pub fn analytic_w(&self, e: &ProductElement, j: usize, side: Side) -> Option<ChainOperator> {
        if self.boundary == Boundary::Open && (j == 0 || j >= self.n_cells) {
            return None;
        }
        let (a, b) = (e.h.0[0] as i64, e.g.0[0] as i64);
        let (ea, eb) = match side {
            Side::Right => (a, -b),
            Side::Left => (-a, b),
        };
        let prev = (j + self.n_cells - 1) % self.n_cells;
        let (se, so) = (self.even_site(prev), self.odd_site(j));
        match self.kind {
            ModelKind::Trivial { .. } => Some(self.identity_operator()),
            _ if self.backend == Backend::Stabilizer => {
                let mut p = PauliString::identity(self.n_sites());
                if ea.rem_euclid(2) == 1 {
                    p.set(se, Letter::Z);
                }
                if eb.rem_euclid(2) == 1 {
                    p.set(so, Letter::Z);
                }
                Some(ChainOperator::Pauli(p))
            }
            _ => {
                let z = clock(self.d);
                let mut factors = Vec::new();
                if ea.rem_euclid(self.d as i64) != 0 {
                    factors.push(LocalOperator::single(se, matrix_power(&z, ea)));
                }
                if eb.rem_euclid(self.d as i64) != 0 {
                    factors.push(LocalOperator::single(so, matrix_power(&z, eb)));
                }
                Some(ChainOperator::Dense(factors))
            }
        }
    }
}

/// Qubit cluster chain on the stabilizer backend with open ends.
pub fn build_cluster_qubit(n_cells: usize) -> Result<(SptModel, ChainState)> {
    build_cluster_qubit_with(n_cells, ModelOptions::default())
}

pub fn build_cluster_qubit_with(n_cells: usize, opts: ModelOptions) -> Result<(SptModel, ChainState)> {
    let m = SptModel::assemble(ModelKind::ClusterQubit, n_cells, opts)?;
    let s = m.prepare()?;
    Ok((m, s))
}

/// `Z_d × Z_d` cluster chain on the dense backend with open ends.
pub fn build_cluster_qudit(n_cells: usize, d: usize) -> Result<(SptModel, ChainState)> {
    build_cluster_qudit_with(n_cells, d, ModelOptions::dense())
}

pub fn build_cluster_qudit_with(n_cells: usize, d: usize, opts: ModelOptions) -> Result<(SptModel, ChainState)> {
    if !(2..=3).contains(&d) {
        return Err(SptError::InvalidArgument(format!("qudit dimension {d} not in {{2, 3}}")));
    }
    let m = SptModel::assemble(ModelKind::ClusterQudit { d }, n_cells, opts)?;
    let s = m.prepare()?;
    Ok((m, s))
}

/// Product state with the same symmetry but no entangler.
pub fn build_trivial(n_cells: usize, d: usize, opts: ModelOptions) -> Result<(SptModel, ChainState)> {
    let m = SptModel::assemble(ModelKind::Trivial { d }, n_cells, opts)?;
    let s = m.prepare()?;
    Ok((m, s))
}
