//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
/// Dense complex matrix; the carrier of every element in this crate.
pub type ComplexMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Eigenvalues below this (relative to the largest) are treated as zero when powering.
pub const EIG_CLIP: f64 = 1e-14;

pub fn cplx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

pub fn real_diag(d: &[f64]) -> ComplexMatrix {
    let n = d.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { cplx(d[i], 0.0) } else { ZERO })
}

/// Matrix unit e_{ij} (zero-based) in an n×n algebra.
pub fn unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(n, n);
    m[(i, j)] = ONE;
    m
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |i, j| cplx(data[i * cols + j], 0.0))
}

pub fn trace(x: &ComplexMatrix) -> C64 {
    x.diagonal().iter().sum()
}

/// Frobenius inner product ⟨a, b⟩ = Σ conj(a_ij) b_ij.
pub fn frob_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frob_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermitian_part(h: &ComplexMatrix) -> ComplexMatrix {
    (h + h.adjoint()).scale(0.5)
}

/// Singular values in descending order.
pub fn singular_values(x: &ComplexMatrix) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = x.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Thin SVD x = U diag(s) V*, returned as (U, s, V).
pub fn svd(x: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let d = x.clone().svd(true, true);
    let u = d.u.expect("svd u");
    let v = d.v_t.expect("svd v_t").adjoint();
    (u, d.singular_values.iter().copied().collect(), v)
}

pub fn op_norm(x: &ComplexMatrix) -> f64 {
    singular_values(x).first().copied().unwrap_or(0.0)
}

/// Eigen-decomposition of the Hermitian part of `h`, eigenvalues ascending.
pub fn eigh(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let e = SymmetricEigen::new(hermitian_part(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = ComplexMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> f64 {
    eigh(h).0.first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(h: &ComplexMatrix) -> f64 {
    eigh(h).0.last().copied().unwrap_or(0.0)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn herm_fn(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let (vals, v) = eigh(h);
    let d: Vec<f64> = vals.iter().map(|&l| f(l)).collect();
    &v * real_diag(&d) * v.adjoint()
}

/// Principal power of a positive semidefinite matrix. Eigenvalues below the
/// clipping threshold count as zero, so negative powers act as pseudo-inverses.
pub fn psd_pow(h: &ComplexMatrix, s: f64) -> ComplexMatrix {
    let (vals, v) = eigh(h);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cut = EIG_CLIP * top.max(f64::MIN_POSITIVE);
    let d: Vec<f64> = vals
        .iter()
        .map(|&l| if l <= cut { 0.0 } else if s == 0.0 { 1.0 } else { l.powf(s) })
        .collect();
    &v * real_diag(&d) * v.adjoint()
}

pub fn psd_sqrt(h: &ComplexMatrix) -> ComplexMatrix {
    psd_pow(h, 0.5)
}

/// ℓ_s norm of a nonnegative vector, s ∈ (0, ∞], computed with scaling.
pub fn lp_of(values: &[f64], s: f64) -> f64 {
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    if s.is_infinite() {
        return top;
    }
    top * values.iter().map(|v| (v.abs() / top).powf(s)).sum::<f64>().powf(1.0 / s)
}

/// Schatten s-norm of a positive semidefinite matrix from its eigenvalues.
pub fn psd_schatten(h: &ComplexMatrix, s: f64) -> f64 {
    let vals: Vec<f64> = eigh(h).0.into_iter().map(|l| l.max(0.0)).collect();
    lp_of(&vals, s)
}

/// Conjugate exponent, with 1 ↔ ∞.
pub fn conj_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Complex Gaussian matrix with E|z|² = 1 per entry.
pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        cplx(s * re, s * im)
    })
}

pub fn random_real<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cplx(rng.sample(StandardNormal), 0.0))
}

/// Random positive definite matrix W W* + shift·I.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, shift: f64) -> ComplexMatrix {
    let w = random_gaussian(rng, n, n);
    &w * w.adjoint() + identity(n).scale(shift)
}

/// Random unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    random_gaussian(rng, n, n).qr().q()
}
