//! Schatten norms, trace duality, weighted embeddings and state densities:
//! the substrate for every other module.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{
    conj_exponent, eigh, lp_of, psd_pow, psd_schatten, real_diag, singular_values, svd, ComplexMatrix, C64,
};

pub const DEFAULT_TOL: f64 = 1e-9;

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid(format!("exponent p = {p} must lie in [1, ∞]")));
    }
    Ok(())
}

/// (Σ σ_i^p)^{1/p}, or the largest singular value for p = ∞.
pub fn schatten_norm(x: &ComplexMatrix, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_of(&singular_values(x), p))
}

/// tr(xy).
pub fn trace_pair(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<C64> {
    if x.ncols() != y.nrows() || y.ncols() != x.nrows() {
        return Err(mismatch(format!(
            "tr(xy) needs x: a×b and y: b×a, got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..x.nrows() {
        for k in 0..x.ncols() {
            acc += x[(i, k)] * y[(k, i)];
        }
    }
    Ok(acc)
}

/// The element of the unit ball of S_{p'} that norms `x`: tr(x·y) = ‖x‖_p.
///
/// Built from the SVD x = U Σ V*: y = V diag(σ^{p-1}/‖σ‖_p^{p-1}) U*.
pub fn norming_functional(x: &ComplexMatrix, p: f64) -> Result<ComplexMatrix> {
    check_exponent(p)?;
    let (u, s, v) = svd(x);
    let norm = lp_of(&s, p);
    if norm == 0.0 {
        return Ok(ComplexMatrix::zeros(x.ncols(), x.nrows()));
    }
    let w: Vec<f64> = if p.is_infinite() {
        // Any convex combination on the top singular space works; take the top pair.
        let mut w = vec![0.0; s.len()];
        w[0] = 1.0;
        w
    } else if p == 1.0 {
        s.iter().map(|&si| if si > 1e-14 * norm { 1.0 } else { 0.0 }).collect()
    } else {
        s.iter().map(|&si| (si / norm).powf(p - 1.0)).collect()
    };
    Ok(&v * real_diag(&w) * u.adjoint())
}

/// Exponent bookkeeping: p, its conjugate, the conjugate r of p/2, and the
/// interpolated q for a given θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpParams {
    #[serde(with = "crate::json::exponent")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl LpParams {
    pub fn new(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self { p, theta: None })
    }

    pub fn with_theta(p: f64, theta: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(invalid(format!("θ = {theta} must lie in [0, 1]")));
        }
        Ok(Self { p, theta: Some(theta) })
    }

    pub fn p_conj(&self) -> f64 {
        conj_exponent(self.p)
    }

    /// 1/r = 1 − 2/p; defined for p > 2 (r = ∞ at p = 2).
    pub fn r(&self) -> Option<f64> {
        if self.p < 2.0 {
            return None;
        }
        Some(conj_exponent(self.p / 2.0))
    }

    /// 1/q = (1−θ)/p + θ/p'.
    pub fn q(&self) -> Option<f64> {
        let th = self.theta?;
        let inv = (1.0 - th) / self.p + th / self.p_conj();
        Some(if inv == 0.0 { f64::INFINITY } else { 1.0 / inv })
    }
}

/// Positive semidefinite density of a functional on L_{s'} sitting in the unit
/// ball of S_s (s = `exponent`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDensity {
    #[serde(with = "crate::json::matrix")]
    pub density: ComplexMatrix,
    #[serde(with = "crate::json::exponent")]
    pub exponent: f64,
}

impl StateDensity {
    pub fn new(density: ComplexMatrix, exponent: f64, tol: f64) -> Result<Self> {
        if !density.is_square() {
            return Err(mismatch(format!("density must be square, got {:?}", density.shape())));
        }
        let herm_err = (&density - density.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > tol.max(1e-12) * (1.0 + density.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
            return Err(invalid(format!("density is not Hermitian (defect {herm_err:e})")));
        }
        let lo = eigh(&density).0.first().copied().unwrap_or(0.0);
        if lo < -tol {
            return Err(Error::NotPositive(lo));
        }
        let norm = psd_schatten(&density, exponent);
        if norm > 1.0 + tol {
            return Err(invalid(format!("density has S_{exponent} norm {norm} > 1")));
        }
        Ok(Self { density, exponent })
    }

    /// Normalized identity n^{-1/s}·I: the uniform density on the unit sphere.
    pub fn uniform(n: usize, exponent: f64) -> Self {
        let c = if exponent.is_infinite() { 1.0 } else { (n as f64).powf(-1.0 / exponent) };
        Self { density: ComplexMatrix::identity(n, n).scale(c), exponent }
    }

    pub fn dim(&self) -> usize {
        self.density.nrows()
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<C64> {
        state_apply(self, x)
    }
}

/// f(x) = tr(F x).
pub fn state_apply(f: &StateDensity, x: &ComplexMatrix) -> Result<C64> {
    if x.shape() != f.density.shape() {
        return Err(mismatch(format!(
            "state of size {:?} applied to {:?}",
            f.density.shape(),
            x.shape()
        )));
    }
    trace_pair(&f.density, x)
}

/// d^{η/p} · x · d^{(1−η)/p} for a faithful density d.
pub fn weighted_embed(x: &ComplexMatrix, d: &ComplexMatrix, p: f64, eta: f64) -> Result<ComplexMatrix> {
    check_exponent(p)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("η = {eta} must lie in [0, 1]")));
    }
    if !d.is_square() || d.shape() != x.shape() {
        return Err(mismatch(format!("density {:?} vs element {:?}", d.shape(), x.shape())));
    }
    let lo = eigh(d).0.first().copied().unwrap_or(0.0);
    if lo < 1e-12 {
        return Err(Error::NotFaithful(lo));
    }
    let (left, right) = if p.is_infinite() { (0.0, 0.0) } else { (eta / p, (1.0 - eta) / p) };
    Ok(psd_pow(d, left) * x * psd_pow(d, right))
}
