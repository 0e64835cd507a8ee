//! Random matrices for tests and the localization experiments.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Complex Ginibre matrix with unit-variance entries.
pub fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    let qr = ginibre(n, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..n {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= ph;
        }
    }
    q
}

/// `(V ⊗ I) e^{iεH}` on sites of dimensions `dims`: `V` Haar on the first
/// `keep` sites and `H` a Hermitian Ginibre matrix of unit operator norm.
pub fn near_local_unitary<R: Rng + ?Sized>(dims: &[usize], keep: usize, epsilon: f64, rng: &mut R) -> DMatrix<C64> {
    let head: usize = dims[..keep].iter().product();
    let tail: usize = dims[keep..].iter().product();
    let v = haar_unitary(head, rng).kronecker(&DMatrix::identity(tail, tail));
    let g = ginibre(head * tail, rng);
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let phases = eig.eigenvalues.map(|x| C64::from_polar(1.0, epsilon * x / scale));
    let exp = &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
    v * exp
}
