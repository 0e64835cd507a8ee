use std::sync::OnceLock;

use rand::Rng;

use super::string::PauliString;
use crate::error::{Result, SptError};

/// Clifford gates understood by the tableau.
#[derive(Clone, Debug, PartialEq)]
pub enum CliffordGate {
    H(usize),
    S(usize),
    Sdg(usize),
    Cz(usize, usize),
    Cnot { control: usize, target: usize },
    Pauli(PauliString),
}

/// Pure stabilizer state on `n` qubits, stored as `n` independent commuting
/// Hermitian generators.
#[derive(Clone, Debug)]
pub struct StabilizerTableau {
    n: usize,
    rows: Vec<PauliString>,
    echelon: OnceLock<Vec<(usize, PauliString)>>,
}

/// Column index `2·site` for the X bit and `2·site + 1` for the Z bit.
fn col_bit(p: &PauliString, col: usize) -> bool {
    if col.is_multiple_of(2) {
        p.x_bit(col / 2)
    } else {
        p.z_bit(col / 2)
    }
}

/// Fully reduced row echelon form over GF(2), processing columns in `order`.
/// Row products keep their exact phase.
fn eliminate(rows: &[PauliString], order: &[usize]) -> Vec<(usize, PauliString)> {
    let mut free: Vec<PauliString> = rows.to_vec();
    let mut pivots: Vec<(usize, PauliString)> = Vec::new();
    for &c in order {
        let Some(k) = free.iter().position(|r| col_bit(r, c)) else {
            continue;
        };
        let pivot = free.swap_remove(k);
        for r in free.iter_mut().chain(pivots.iter_mut().map(|(_, r)| r)) {
            if col_bit(r, c) {
                *r = r.mul(&pivot);
            }
        }
        pivots.push((c, pivot));
    }
    pivots
}

impl StabilizerTableau {
    /// `|0…0⟩`.
    pub fn zero_state(n: usize) -> Self {
        let rows = (0..n).map(|k| PauliString::single(n, k, 'Z')).collect();
        Self::from_rows_unchecked(n, rows)
    }

    /// `|+…+⟩`.
    pub fn plus_state(n: usize) -> Self {
        let rows = (0..n).map(|k| PauliString::single(n, k, 'X')).collect();
        Self::from_rows_unchecked(n, rows)
    }

    pub fn from_generators(generators: Vec<PauliString>) -> Result<Self> {
        let n = generators.len();
        if let Some(g) = generators.iter().find(|g| g.n_qubits() != n) {
            return Err(SptError::DimensionMismatch {
                expected: n,
                got: g.n_qubits(),
            });
        }
        let t = Self::from_rows_unchecked(n, generators);
        t.check_invariants()?;
        Ok(t)
    }

    fn from_rows_unchecked(n: usize, rows: Vec<PauliString>) -> Self {
        Self {
            n,
            rows,
            echelon: OnceLock::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.rows
    }

    /// Hermiticity, pairwise commutation and GF(2) independence.
    pub fn check_invariants(&self) -> Result<()> {
        for (a, ra) in self.rows.iter().enumerate() {
            if !ra.is_hermitian() {
                return Err(SptError::Assertion(format!("generator {a} is not Hermitian")));
            }
            for (b, rb) in self.rows.iter().enumerate().skip(a + 1) {
                if !ra.commutes(rb) {
                    return Err(SptError::Assertion(format!("generators {a} and {b} anticommute")));
                }
            }
        }
        let order: Vec<usize> = (0..2 * self.n).collect();
        let rank = eliminate(&self.rows, &order).len();
        if rank != self.n {
            return Err(SptError::Assertion(format!(
                "generators have rank {rank}, expected {}",
                self.n
            )));
        }
        Ok(())
    }

    fn check_site(&self, k: usize) -> Result<()> {
        if k >= self.n {
            return Err(SptError::IndexOutOfRange {
                what: "qubits",
                index: k,
                len: self.n,
            });
        }
        Ok(())
    }

    fn echelon(&self) -> &[(usize, PauliString)] {
        self.echelon.get_or_init(|| {
            let order: Vec<usize> = (0..2 * self.n).collect();
            eliminate(&self.rows, &order)
        })
    }

    fn touch(&mut self) {
        self.echelon = OnceLock::new();
    }

    /// Conjugates every generator by `gate`.
    pub fn apply(&mut self, gate: &CliffordGate) -> Result<()> {
        match gate {
            CliffordGate::H(a) | CliffordGate::S(a) | CliffordGate::Sdg(a) => self.check_site(*a)?,
            CliffordGate::Cz(a, b)
            | CliffordGate::Cnot {
                control: a,
                target: b,
            } => {
                self.check_site(*a)?;
                self.check_site(*b)?;
                if a == b {
                    return Err(SptError::InvalidArgument(format!(
                        "two-qubit gate on a single site {a}"
                    )));
                }
            }
            CliffordGate::Pauli(p) => {
                if p.n_qubits() != self.n {
                    return Err(SptError::DimensionMismatch {
                        expected: self.n,
                        got: p.n_qubits(),
                    });
                }
            }
        }
        self.touch();
        for row in &mut self.rows {
            conjugate(row, gate);
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a CliffordGate>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// `⟨P⟩ ∈ {+1, −1, 0}` for Hermitian `P`.
    pub fn expectation(&self, p: &PauliString) -> Result<i8> {
        self.check_operand(p)?;
        if !p.is_hermitian() {
            return Err(SptError::InvalidArgument(format!("{p} is not Hermitian")));
        }
        if self.rows.iter().any(|r| !r.commutes(p)) {
            return Ok(0);
        }
        let residual = self.reduce(p);
        debug_assert!(residual.is_identity(), "commuting string not in the stabilizer group");
        Ok(if residual.phase() == 0 { 1 } else { -1 })
    }

    /// `P · S` with `S` in the stabilizer group, cancelling every pivot column.
    fn reduce(&self, p: &PauliString) -> PauliString {
        let mut r = p.clone();
        for (c, row) in self.echelon() {
            if col_bit(&r, *c) {
                r = r.mul(row);
            }
        }
        r
    }

    fn check_operand(&self, p: &PauliString) -> Result<()> {
        if p.n_qubits() != self.n {
            return Err(SptError::DimensionMismatch {
                expected: self.n,
                got: p.n_qubits(),
            });
        }
        Ok(())
    }

    /// Projective measurement of Hermitian `P`. Returns the outcome `±1` and
    /// its Born probability.
    pub fn measure_pauli<R: Rng + ?Sized>(&mut self, p: &PauliString, rng: &mut R) -> Result<(i8, f64)> {
        self.check_operand(p)?;
        if !p.is_hermitian() {
            return Err(SptError::InvalidArgument(format!("{p} is not Hermitian")));
        }
        if self.rows.iter().all(|r| r.commutes(p)) {
            let v = self.expectation(p)?;
            return Ok((v, 1.0));
        }
        let outcome = if rng.random::<bool>() { 1 } else { -1 };
        self.collapse(p, outcome);
        Ok((outcome, 0.5))
    }

    /// Projects onto the `outcome` eigenspace of `P`, returning its probability.
    pub fn postselect_pauli(&mut self, p: &PauliString, outcome: i8) -> Result<f64> {
        self.check_operand(p)?;
        if !p.is_hermitian() || (outcome != 1 && outcome != -1) {
            return Err(SptError::InvalidArgument(format!(
                "cannot postselect {p} on outcome {outcome}"
            )));
        }
        if self.rows.iter().all(|r| r.commutes(p)) {
            let v = self.expectation(p)?;
            return if v == outcome {
                Ok(1.0)
            } else {
                Err(SptError::ZeroProbabilityOutcome(0.0))
            };
        }
        self.collapse(p, outcome);
        Ok(0.5)
    }

    fn collapse(&mut self, p: &PauliString, outcome: i8) {
        self.touch();
        let anti: Vec<usize> = (0..self.n).filter(|&k| !self.rows[k].commutes(p)).collect();
        let (&first, rest) = anti.split_first().expect("at least one anticommuting generator");
        let pivot = self.rows[first].clone();
        for &k in rest {
            self.rows[k] = self.rows[k].mul(&pivot);
        }
        let sign = if outcome == 1 { 0 } else { 2 };
        self.rows[first] = p.with_phase(p.phase() + sign);
    }

    /// Finds `P' = P·S` (`S` in the stabilizer group) supported inside
    /// `window`, so that `P'|ψ⟩ = P|ψ⟩` exactly. Out-of-window columns are
    /// eliminated first, left to right, X before Z. The in-window remainder
    /// is then reduced by the stabilizers living inside the window, X
    /// columns before Z columns, which makes the output canonical.
    pub fn localize(&self, p: &PauliString, window: &[usize]) -> Result<PauliString> {
        self.check_operand(p)?;
        let mut inside = vec![false; self.n];
        for &s in window {
            self.check_site(s)?;
            inside[s] = true;
        }
        let mut order: Vec<usize> = (0..2 * self.n).filter(|c| !inside[c / 2]).collect();
        order.extend((0..self.n).filter(|&s| inside[s]).map(|s| 2 * s));
        order.extend((0..self.n).filter(|&s| inside[s]).map(|s| 2 * s + 1));
        let pivots = eliminate(&self.rows, &order);
        let mut r = p.clone();
        for (c, row) in &pivots {
            if !inside[c / 2] && col_bit(&r, *c) {
                r = r.mul(row);
            }
        }
        let stray: Vec<usize> = r.support().into_iter().filter(|&s| !inside[s]).collect();
        if !stray.is_empty() {
            return Err(SptError::LocalizationInfeasible(format!(
                "{} sites outside the window remain, first at {}",
                stray.len(),
                stray[0]
            )));
        }
        for (c, row) in &pivots {
            if inside[c / 2] && col_bit(&r, *c) {
                r = r.mul(row);
            }
        }
        Ok(r)
    }
}

fn conjugate(row: &mut PauliString, gate: &CliffordGate) {
    match gate {
        CliffordGate::H(a) => {
            let (x, z) = (row.x_bit(*a), row.z_bit(*a));
            if x && z {
                row.add_phase(2);
            }
            row.set_bits(*a, z, x);
        }
        CliffordGate::S(a) => {
            let (x, z) = (row.x_bit(*a), row.z_bit(*a));
            if x && z {
                row.add_phase(2);
            }
            row.set_bits(*a, x, z ^ x);
        }
        CliffordGate::Sdg(a) => {
            let (x, z) = (row.x_bit(*a), row.z_bit(*a));
            if x && !z {
                row.add_phase(2);
            }
            row.set_bits(*a, x, z ^ x);
        }
        CliffordGate::Cnot { control, target } => {
            let (xc, zc) = (row.x_bit(*control), row.z_bit(*control));
            let (xt, zt) = (row.x_bit(*target), row.z_bit(*target));
            if xc && zt && !(xt ^ zc) {
                row.add_phase(2);
            }
            row.set_bits(*target, xt ^ xc, zt);
            row.set_bits(*control, xc, zc ^ zt);
        }
        CliffordGate::Cz(a, b) => {
            let (xa, za) = (row.x_bit(*a), row.z_bit(*a));
            let (xb, zb) = (row.x_bit(*b), row.z_bit(*b));
            if xa && xb && (za ^ zb) {
                row.add_phase(2);
            }
            row.set_bits(*a, xa, za ^ xb);
            row.set_bits(*b, xb, zb ^ xa);
        }
        CliffordGate::Pauli(p) => {
            if !row.commutes(p) {
                row.add_phase(2);
            }
        }
    }
}
