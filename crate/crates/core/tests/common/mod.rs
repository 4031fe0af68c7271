#![allow(dead_code)]

use nclp::linalg::{cplx, eigh, ComplexMatrix};
use nclp::vv::MatrixSubspace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn mat(rows: usize, cols: usize, re: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |i, j| cplx(re[i * cols + j], 0.0))
}

pub fn diag(d: &[f64]) -> ComplexMatrix {
    let n = d.len();
    ComplexMatrix::from_fn(n, n, |i, j| cplx(if i == j { d[i] } else { 0.0 }, 0.0))
}

/// Singular values from the eigenvalues of the smaller Gram matrix
/// (independent of the SVD path).
pub fn singular_values_by_eig(x: &ComplexMatrix) -> Vec<f64> {
    let gram = if x.nrows() < x.ncols() { x * x.adjoint() } else { x.adjoint() * x };
    eigh(&gram).0.into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

pub fn schatten_by_eig(x: &ComplexMatrix, p: f64) -> f64 {
    let s = singular_values_by_eig(x);
    if p.is_infinite() {
        s.iter().cloned().fold(0.0, f64::max)
    } else {
        s.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

pub fn diagonal_space(p: f64) -> MatrixSubspace {
    MatrixSubspace::diagonal(2, p).unwrap()
}

/// A random 2-dimensional subspace of 2×2 matrices.
pub fn random_space(rng: &mut ChaCha8Rng, p: f64) -> MatrixSubspace {
    let basis = vec![nclp::linalg::random_gaussian(rng, 2, 2), nclp::linalg::random_gaussian(rng, 2, 2)];
    MatrixSubspace::new(2, p, basis).unwrap()
}
