use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Result, SptError};

/// Single-qubit Pauli letter. `Y` is stored as `x = z = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' | 'i' | '_' => Ok(Letter::I),
            'X' | 'x' => Ok(Letter::X),
            'Y' | 'y' => Ok(Letter::Y),
            'Z' | 'z' => Ok(Letter::Z),
            other => Err(SptError::InvalidArgument(format!("unknown Pauli letter {other:?}"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Letter::I => [[l, o], [o, l]],
            Letter::X => [[o, l], [l, o]],
            Letter::Y => [[o, -i], [i, o]],
            Letter::Z => [[l, o], [o, -l]],
        }
    }
}

/// `i^phase · σ_0 ⊗ σ_1 ⊗ … ⊗ σ_{n-1}` with bit-packed X/Z parts.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            x: vec![0; words(n)],
            z: vec![0; words(n)],
            phase: 0,
        }
    }

    /// One letter on `site`, identity elsewhere. Panics on a bad letter or site.
    pub fn single(n: usize, site: usize, letter: char) -> Self {
        let mut p = Self::identity(n);
        p.set(site, Letter::from_char(letter).expect("valid Pauli letter"));
        p
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Self::identity(letters.len());
        for (k, &l) in letters.iter().enumerate() {
            p.set(k, l);
        }
        p
    }

    /// Same letter on every site of `sites`.
    pub fn on_sites(n: usize, sites: impl IntoIterator<Item = usize>, letter: Letter) -> Self {
        let mut p = Self::identity(n);
        for s in sites {
            p.set(s, letter);
        }
        p
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(&self, phase: u8) -> Self {
        let mut p = self.clone();
        p.phase = phase % 4;
        p
    }

    pub fn add_phase(&mut self, k: u8) {
        self.phase = (self.phase + k) % 4;
    }

    /// Hermitian iff the global phase is ±1.
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    pub fn x_bit(&self, k: usize) -> bool {
        self.x[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn z_bit(&self, k: usize) -> bool {
        self.z[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn letter(&self, k: usize) -> Letter {
        Letter::from_bits(self.x_bit(k), self.z_bit(k))
    }

    pub fn set_bits(&mut self, k: usize, x: bool, z: bool) {
        assert!(k < self.n, "site {k} out of range for {} qubits", self.n);
        let (w, b) = (k / 64, k % 64);
        self.x[w] = (self.x[w] & !(1 << b)) | ((x as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((z as u64) << b);
    }

    pub fn set(&mut self, k: usize, l: Letter) {
        let (x, z) = l.bits();
        self.set_bits(k, x, z);
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&k| self.x_bit(k) || self.z_bit(k)).collect()
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// Product `self · other` with exact phase.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        assert_eq!(self.n, other.n, "multiplying Pauli strings of different length");
        let mut out = PauliString::identity(self.n);
        let mut ph = self.phase as i64 + other.phase as i64;
        for w in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[w], self.z[w], other.x[w], other.z[w]);
            let (xa, ya, za) = (x1 & !z1, x1 & z1, !x1 & z1);
            let (xb, yb, zb) = (x2 & !z2, x2 & z2, !x2 & z2);
            let plus = (xa & yb) | (ya & zb) | (za & xb);
            let minus = (ya & xb) | (za & yb) | (xa & zb);
            ph += plus.count_ones() as i64 - minus.count_ones() as i64;
            out.x[w] = x1 ^ x2;
            out.z[w] = z1 ^ z2;
        }
        out.phase = ph.rem_euclid(4) as u8;
        out
    }

    /// `P†`: letters are Hermitian, so only the phase is conjugated.
    pub fn adjoint(&self) -> PauliString {
        self.with_phase((4 - self.phase) % 4)
    }

    /// Inverse equals adjoint for Pauli strings.
    pub fn inverse(&self) -> PauliString {
        self.adjoint()
    }

    pub fn commutes(&self, other: &PauliString) -> bool {
        let mut parity = 0u32;
        for w in 0..self.x.len() {
            parity ^= ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones() & 1;
        }
        parity == 0
    }

    /// Letters only, phase reset to `+1`.
    pub fn strip_phase(&self) -> PauliString {
        self.with_phase(0)
    }

    /// Restriction to `sites` (in the given order); the phase is kept.
    pub fn restrict(&self, sites: &[usize]) -> PauliString {
        let mut p = PauliString::identity(sites.len());
        for (k, &s) in sites.iter().enumerate() {
            p.set_bits(k, self.x_bit(s), self.z_bit(s));
        }
        p.phase = self.phase;
        p
    }

    /// Keeps the letters on `sites`, clears all others; the phase is kept.
    pub fn mask(&self, sites: impl IntoIterator<Item = usize>) -> PauliString {
        let mut p = PauliString::identity(self.n);
        for s in sites {
            p.set_bits(s, self.x_bit(s), self.z_bit(s));
        }
        p.phase = self.phase;
        p
    }

    /// Places this string on `sites` of an `n`-qubit register.
    pub fn embed(&self, n: usize, sites: &[usize]) -> PauliString {
        assert_eq!(sites.len(), self.n);
        let mut p = PauliString::identity(n);
        for (k, &s) in sites.iter().enumerate() {
            p.set_bits(s, self.x_bit(k), self.z_bit(k));
        }
        p.phase = self.phase;
        p
    }

    pub fn tensor(&self, other: &PauliString) -> PauliString {
        let mut p = PauliString::identity(self.n + other.n);
        for k in 0..self.n {
            p.set_bits(k, self.x_bit(k), self.z_bit(k));
        }
        for k in 0..other.n {
            p.set_bits(self.n + k, other.x_bit(k), other.z_bit(k));
        }
        p.phase = (self.phase + other.phase) % 4;
        p
    }

    /// Global phase `i^phase` as a complex number.
    pub fn phase_value(&self) -> C64 {
        crate::group::root_of_unity(self.phase as i64, 4)
    }

    /// Dense matrix in the convention where site 0 is the most significant
    /// tensor factor.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        let phase = self.phase_value();
        // each column c maps to a single row r = c XOR xmask
        let mut xmask = 0usize;
        for k in 0..self.n {
            if self.x_bit(k) {
                xmask |= 1 << (self.n - 1 - k);
            }
        }
        for c in 0..dim {
            let r = c ^ xmask;
            let mut amp = phase;
            for k in 0..self.n {
                let bit = (c >> (self.n - 1 - k)) & 1;
                let entry = self.letter(k).matrix()[(r >> (self.n - 1 - k)) & 1][bit];
                amp *= entry;
            }
            m[(r, c)] = amp;
        }
        m
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n).map(|k| self.letter(k)).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{prefix}")?;
        for k in 0..self.n {
            write!(f, "{}", self.letter(k).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = SptError;

    /// Parses `[+|-][i]LETTERS`, e.g. `-iXZY`.
    fn from_str(s: &str) -> Result<Self> {
        let mut rest = s.trim();
        let mut phase = 0u8;
        if let Some(r) = rest.strip_prefix('-') {
            phase = 2;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        }
        if let Some(r) = rest.strip_prefix('i') {
            phase += 1;
            rest = r;
        }
        let letters = rest.chars().map(Letter::from_char).collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_letters(&letters).with_phase(phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn close(a: &DMatrix<C64>, b: &DMatrix<C64>) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-12)
    }

    #[test]
    fn single_qubit_products() {
        assert_eq!(p("X").mul(&p("Y")), p("iZ"));
        assert_eq!(p("Y").mul(&p("X")), p("-iZ"));
        assert_eq!(p("Z").mul(&p("X")), p("iY"));
        assert_eq!(p("Y").mul(&p("Z")), p("iX"));
        assert_eq!(p("Y").mul(&p("Y")), p("I"));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["+XYZI", "-iZZ", "+iI", "-X"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn matrix_of_product_matches_product_of_matrices() {
        let a = p("XYZ");
        let b = p("iZZX");
        assert!(close(&a.mul(&b).to_matrix(), &(a.to_matrix() * b.to_matrix())));
    }

    #[test]
    fn long_strings_cross_word_boundary() {
        let mut a = PauliString::identity(130);
        a.set(0, Letter::X);
        a.set(64, Letter::Y);
        a.set(129, Letter::Z);
        assert_eq!(a.support(), vec![0, 64, 129]);
        assert_eq!(a.weight(), 3);
        let b = PauliString::single(130, 64, 'Z');
        assert!(!a.commutes(&b));
        assert_eq!(a.mul(&b).letter(64), Letter::X);
        assert_eq!(a.mul(&b).phase(), 1);
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        (proptest::collection::vec(0u8..4, n), 0u8..4).prop_map(|(ls, ph)| {
            let letters: Vec<_> = ls
                .into_iter()
                .map(|l| [Letter::I, Letter::X, Letter::Y, Letter::Z][l as usize])
                .collect();
            PauliString::from_letters(&letters).with_phase(ph)
        })
    }

    proptest! {
        #[test]
        fn multiplication_is_associative(a in arb_pauli(70), b in arb_pauli(70), c in arb_pauli(70)) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn inverse_gives_identity(a in arb_pauli(20)) {
            let id = a.mul(&a.inverse());
            prop_assert!(id.is_identity());
            prop_assert_eq!(id.phase(), 0);
        }

        #[test]
        fn commutation_matches_product_order(a in arb_pauli(9), b in arb_pauli(9)) {
            let ab = a.mul(&b);
            let ba = b.mul(&a);
            if a.commutes(&b) {
                prop_assert_eq!(ab, ba);
            } else {
                prop_assert_eq!(ab, ba.with_phase(ba.phase() + 2));
            }
        }

        #[test]
        fn support_is_nonidentity_sites(a in arb_pauli(12)) {
            let s = a.support();
            for k in 0..12 {
                prop_assert_eq!(s.contains(&k), a.letter(k) != Letter::I);
            }
        }

        #[test]
        fn dense_product_agrees(a in arb_pauli(4), b in arb_pauli(4)) {
            prop_assert!(close(&a.mul(&b).to_matrix(), &(a.to_matrix() * b.to_matrix())));
        }
    }
}
