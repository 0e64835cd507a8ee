//! Finite Abelian groups, their characters, and on-site unitary
//! representations.
//!
//! A group is the direct product of cyclic factors `Z_m1 × Z_m2 × ...`.
//! Characters are labelled by vectors of the same shape and take the value
//! `χ_q(g) = exp(2πi Σ_a q_a g_a / m_a)`. The charge projector for label `q`
//! is the character-weighted group average `P_q = |G|⁻¹ Σ_g χ_q(g) U_g`,
//! which satisfies `U_g P_q = conj(χ_q(g)) P_q`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::pauli::PauliString;

/// Dense tolerance for unitarity, idempotence and eigenrelations.
pub const DENSE_TOL: f64 = 1e-12;

/// Exact `exp(2πi k / n)`, returning exact values at multiples of a quarter turn.
pub fn root_of_unity(k: i64, n: u64) -> C64 {
    let n = n as i64;
    let k = k.rem_euclid(n);
    if (4 * k) % n == 0 {
        return match 4 * k / n {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
    }
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Direct product of cyclic groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteAbelianGroup {
    moduli: Vec<u32>,
}

/// Element of a [`FiniteAbelianGroup`], one residue per cyclic factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement(pub Vec<u32>);

/// Character label; the dual group is isomorphic to the group itself.
pub type CharacterLabel = GroupElement;

impl GroupElement {
    pub fn residues(&self) -> &[u32] {
        &self.0
    }
}

impl std::fmt::Display for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, r) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

impl FiniteAbelianGroup {
    pub fn new(moduli: Vec<u32>) -> Result<Self> {
        if let Some(m) = moduli.iter().find(|&&m| m < 2) {
            return Err(SptError::InvalidArgument(format!(
                "cyclic factor of order {m}; every modulus must be >= 2"
            )));
        }
        Ok(Self { moduli })
    }

    /// The trivial group (no cyclic factors).
    pub fn trivial() -> Self {
        Self { moduli: Vec::new() }
    }

    pub fn cyclic(m: u32) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn moduli(&self) -> &[u32] {
        &self.moduli
    }

    pub fn rank(&self) -> usize {
        self.moduli.len()
    }

    pub fn order(&self) -> usize {
        self.moduli.iter().map(|&m| m as usize).product()
    }

    /// Least common multiple of the factor orders (the exponent of the group).
    pub fn exponent(&self) -> u64 {
        self.moduli.iter().fold(1, |acc, &m| lcm(acc, m as u64))
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(vec![0; self.moduli.len()])
    }

    pub fn element(&self, residues: Vec<u32>) -> Result<GroupElement> {
        self.check(&residues)?;
        Ok(GroupElement(residues))
    }

    fn check(&self, residues: &[u32]) -> Result<()> {
        if residues.len() != self.moduli.len() {
            return Err(SptError::InvalidArgument(format!(
                "element has {} residues, group has {} factors",
                residues.len(),
                self.moduli.len()
            )));
        }
        for (r, m) in residues.iter().zip(&self.moduli) {
            if r >= m {
                return Err(SptError::InvalidArgument(format!(
                    "residue {r} out of range for Z_{m}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.check(&g.0).is_ok()
    }

    pub fn add(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.moduli)
                .map(|((x, y), m)| (x + y) % m)
                .collect(),
        )
    }

    pub fn inverse(&self, a: &GroupElement) -> GroupElement {
        GroupElement(
            a.0.iter()
                .zip(&self.moduli)
                .map(|(x, m)| (m - x) % m)
                .collect(),
        )
    }

    /// Mixed-radix index of an element, last factor fastest.
    pub fn index_of(&self, g: &GroupElement) -> usize {
        g.0.iter()
            .zip(&self.moduli)
            .fold(0, |acc, (&r, &m)| acc * m as usize + r as usize)
    }

    pub fn element_at(&self, mut index: usize) -> GroupElement {
        let mut res = vec![0; self.moduli.len()];
        for (slot, &m) in res.iter_mut().zip(&self.moduli).rev() {
            *slot = (index % m as usize) as u32;
            index /= m as usize;
        }
        GroupElement(res)
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.order()).map(|k| self.element_at(k))
    }

    /// `χ_q(g)`; errors when the shapes disagree with the group.
    pub fn character_value(&self, q: &CharacterLabel, g: &GroupElement) -> Result<C64> {
        self.check(&q.0)?;
        self.check(&g.0)?;
        Ok(self.character_unchecked(q, g))
    }

    pub(crate) fn character_unchecked(&self, q: &CharacterLabel, g: &GroupElement) -> C64 {
        let n = self.exponent();
        let k: u64 = q
            .0
            .iter()
            .zip(&g.0)
            .zip(&self.moduli)
            .map(|((&qa, &ga), &m)| (qa as u64 * ga as u64 % m as u64) * (n / m as u64))
            .sum();
        root_of_unity((k % n) as i64, n)
    }
}

/// Free function form of [`FiniteAbelianGroup::character_value`].
pub fn character_value(group: &FiniteAbelianGroup, q: &CharacterLabel, g: &GroupElement) -> Result<C64> {
    group.character_value(q, g)
}

/// Element of `G × H`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductElement {
    pub g: GroupElement,
    pub h: GroupElement,
}

impl std::fmt::Display for ProductElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[g={}, h={}]", self.g, self.h)
    }
}

/// `𝒢 = G × H`; `g_part` is always the measured subgroup.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductGroup {
    pub g_part: FiniteAbelianGroup,
    pub h_part: FiniteAbelianGroup,
}

impl ProductGroup {
    pub fn new(g_part: FiniteAbelianGroup, h_part: FiniteAbelianGroup) -> Self {
        Self { g_part, h_part }
    }

    /// The product seen as one flat Abelian group, `G` factors first.
    pub fn flat(&self) -> FiniteAbelianGroup {
        let mut moduli = self.g_part.moduli().to_vec();
        moduli.extend_from_slice(self.h_part.moduli());
        FiniteAbelianGroup { moduli }
    }

    pub fn order(&self) -> usize {
        self.g_part.order() * self.h_part.order()
    }

    pub fn identity(&self) -> ProductElement {
        ProductElement {
            g: self.g_part.identity(),
            h: self.h_part.identity(),
        }
    }

    pub fn element(&self, g: Vec<u32>, h: Vec<u32>) -> Result<ProductElement> {
        Ok(ProductElement {
            g: self.g_part.element(g)?,
            h: self.h_part.element(h)?,
        })
    }

    pub fn from_g(&self, g: GroupElement) -> ProductElement {
        ProductElement {
            g,
            h: self.h_part.identity(),
        }
    }

    pub fn from_h(&self, h: GroupElement) -> ProductElement {
        ProductElement {
            g: self.g_part.identity(),
            h,
        }
    }

    pub fn contains(&self, e: &ProductElement) -> bool {
        self.g_part.contains(&e.g) && self.h_part.contains(&e.h)
    }

    pub fn mul(&self, a: &ProductElement, b: &ProductElement) -> ProductElement {
        ProductElement {
            g: self.g_part.add(&a.g, &b.g),
            h: self.h_part.add(&a.h, &b.h),
        }
    }

    pub fn inverse(&self, a: &ProductElement) -> ProductElement {
        ProductElement {
            g: self.g_part.inverse(&a.g),
            h: self.h_part.inverse(&a.h),
        }
    }

    pub fn to_flat(&self, e: &ProductElement) -> GroupElement {
        let mut r = e.g.0.clone();
        r.extend_from_slice(&e.h.0);
        GroupElement(r)
    }

    pub fn from_flat(&self, flat: &GroupElement) -> ProductElement {
        let k = self.g_part.rank();
        ProductElement {
            g: GroupElement(flat.0[..k].to_vec()),
            h: GroupElement(flat.0[k..].to_vec()),
        }
    }

    pub fn elements(&self) -> Vec<ProductElement> {
        let flat = self.flat();
        flat.elements().map(|e| self.from_flat(&e)).collect()
    }

    pub fn is_identity(&self, e: &ProductElement) -> bool {
        e.g.0.iter().chain(&e.h.0).all(|&r| r == 0)
    }
}

/// A unitary acting on one cell: either a dense matrix or a Pauli string
/// confined to the cell's qubits.
#[derive(Clone, Debug, PartialEq)]
pub enum CellOperator {
    Dense(DMatrix<C64>),
    Pauli(PauliString),
}

impl CellOperator {
    pub fn dim(&self) -> usize {
        match self {
            CellOperator::Dense(m) => m.nrows(),
            CellOperator::Pauli(p) => 1 << p.n_qubits(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match self {
            CellOperator::Dense(m) => m.clone(),
            CellOperator::Pauli(p) => p.to_matrix(),
        }
    }

    pub fn as_pauli(&self) -> Option<&PauliString> {
        match self {
            CellOperator::Pauli(p) => Some(p),
            CellOperator::Dense(_) => None,
        }
    }
}

/// On-site representation `𝔤 ↦ U(𝔤)` of a finite Abelian group on one cell,
/// stored as a full table indexed by [`FiniteAbelianGroup::index_of`].
#[derive(Clone, Debug)]
pub struct OnSiteRepresentation {
    group: FiniteAbelianGroup,
    table: Vec<CellOperator>,
    cell_dim: usize,
}

impl OnSiteRepresentation {
    /// Build from an explicit table. Entries must all be unitary of the same
    /// dimension; linearity is checked separately by [`Self::is_linear`].
    pub fn from_table(group: FiniteAbelianGroup, table: Vec<CellOperator>) -> Result<Self> {
        if table.len() != group.order() {
            return Err(SptError::InvalidRepresentation(format!(
                "table has {} entries for a group of order {}",
                table.len(),
                group.order()
            )));
        }
        let cell_dim = table.first().map(CellOperator::dim).unwrap_or(1);
        for (k, u) in table.iter().enumerate() {
            if u.dim() != cell_dim {
                return Err(SptError::DimensionMismatch {
                    expected: cell_dim,
                    got: u.dim(),
                });
            }
            if let CellOperator::Dense(m) = u {
                let dev = unitarity_deviation(m);
                if dev > DENSE_TOL {
                    return Err(SptError::InvalidRepresentation(format!(
                        "entry {} is not unitary (deviation {dev:.3e})",
                        group.element_at(k)
                    )));
                }
            }
        }
        Ok(Self {
            group,
            table,
            cell_dim,
        })
    }

    /// Build from one generator per cyclic factor: `U(g) = Π_a gen_a^{g_a}`.
    pub fn from_generators(group: FiniteAbelianGroup, generators: Vec<CellOperator>) -> Result<Self> {
        if generators.len() != group.rank() {
            return Err(SptError::InvalidRepresentation(format!(
                "{} generators for {} cyclic factors",
                generators.len(),
                group.rank()
            )));
        }
        let all_pauli = generators.iter().all(|g| matches!(g, CellOperator::Pauli(_)));
        let dim = generators.first().map(CellOperator::dim).unwrap_or(1);
        let table = group
            .elements()
            .map(|g| {
                if all_pauli {
                    let n = generators
                        .first()
                        .and_then(CellOperator::as_pauli)
                        .map(PauliString::n_qubits)
                        .unwrap_or(0);
                    let mut acc = PauliString::identity(n);
                    for (gen, &r) in generators.iter().zip(g.residues()) {
                        let p = gen.as_pauli().expect("all generators are Pauli");
                        for _ in 0..r {
                            acc = acc.mul(p);
                        }
                    }
                    CellOperator::Pauli(acc)
                } else {
                    let mut acc = DMatrix::<C64>::identity(dim, dim);
                    for (gen, &r) in generators.iter().zip(g.residues()) {
                        let m = gen.to_dense();
                        for _ in 0..r {
                            acc = &acc * &m;
                        }
                    }
                    CellOperator::Dense(acc)
                }
            })
            .collect();
        Self::from_table(group, table)
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn cell_dim(&self) -> usize {
        self.cell_dim
    }

    pub fn is_pauli(&self) -> bool {
        self.table.iter().all(|u| matches!(u, CellOperator::Pauli(_)))
    }

    pub fn get(&self, g: &GroupElement) -> &CellOperator {
        &self.table[self.group.index_of(g)]
    }

    pub fn dense(&self, g: &GroupElement) -> DMatrix<C64> {
        self.get(g).to_dense()
    }

    /// Restrict to the subgroup generated by the leading `rank` factors
    /// (the `G` part of a flattened `G × H`).
    pub fn restrict_leading(&self, sub: &FiniteAbelianGroup) -> Result<Self> {
        let k = sub.rank();
        if self.group.moduli()[..k] != *sub.moduli() {
            return Err(SptError::InvalidArgument(
                "subgroup factors do not match the leading factors".into(),
            ));
        }
        let pad = self.group.rank() - k;
        let table = sub
            .elements()
            .map(|g| {
                let mut r = g.0.clone();
                r.extend(std::iter::repeat_n(0, pad));
                self.get(&GroupElement(r)).clone()
            })
            .collect();
        Self::from_table(sub.clone(), table)
    }

    /// Exact (Pauli) or 1e-12 (dense) check of `U(g)U(g') = U(g+g')`.
    pub fn is_linear(&self) -> bool {
        let elems: Vec<_> = self.group.elements().collect();
        for a in &elems {
            for b in &elems {
                let ab = self.group.add(a, b);
                let ok = match (self.get(a), self.get(b), self.get(&ab)) {
                    (CellOperator::Pauli(pa), CellOperator::Pauli(pb), CellOperator::Pauli(pab)) => {
                        pa.mul(pb) == *pab
                    }
                    (x, y, z) => {
                        let lhs = x.to_dense() * y.to_dense();
                        max_abs_diff(&lhs, &z.to_dense()) <= DENSE_TOL
                    }
                };
                if !ok {
                    return false;
                }
            }
        }
        true
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub(crate) fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let prod = m.adjoint() * m;
    max_abs_diff(&prod, &DMatrix::identity(m.nrows(), m.ncols()))
}

fn projector_unchecked(rep: &OnSiteRepresentation, q: &CharacterLabel) -> DMatrix<C64> {
    let group = rep.group();
    let d = rep.cell_dim();
    let mut acc = DMatrix::<C64>::zeros(d, d);
    for g in group.elements() {
        let chi = group.character_unchecked(q, &g);
        acc += rep.dense(&g) * chi;
    }
    acc / C64::new(group.order() as f64, 0.0)
}

/// `P_q = |G|⁻¹ Σ_g χ_q(g) U_g` as a dense cell matrix.
pub fn charge_projector(rep: &OnSiteRepresentation, q: &CharacterLabel) -> Result<DMatrix<C64>> {
    if !rep.group().contains(q) {
        return Err(SptError::InvalidArgument(format!(
            "character label {q} does not match the group"
        )));
    }
    if !rep.is_linear() {
        return Err(SptError::InvalidRepresentation(
            "representation is not linear".into(),
        ));
    }
    Ok(projector_unchecked(rep, q))
}

/// Checks `U_g P_q = conj(χ_q(g)) P_q` for every `g`. Pauli representations
/// additionally require exact linearity of the table.
pub fn verify_eigenrelation(rep: &OnSiteRepresentation, q: &CharacterLabel) -> bool {
    if !rep.group().contains(q) {
        return false;
    }
    if rep.is_pauli() && !rep.is_linear() {
        return false;
    }
    let p = projector_unchecked(rep, q);
    rep.group().elements().all(|g| {
        let chi = rep.group().character_unchecked(q, &g);
        let lhs = rep.dense(&g) * &p;
        let rhs = &p * chi.conj();
        max_abs_diff(&lhs, &rhs) <= DENSE_TOL
    })
}
