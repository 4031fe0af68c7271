//! The Haagerup-type tensor norm h_{p,q} on E ⊗ F for matrix subspaces, its
//! dual state-pair certificates, and factorizations through p-row / p-column
//! Hilbert spaces.
//!
//! The primal works on Gram matrices: a factorization x = a ⊙ b in
//! coordinates is C = A·B, and with G = AA* the row side only sees G while
//! the column side only sees B*B = C* G^{-1} C for the optimal B. So
//! ‖x‖_h = min over positive G (supported on the range of C) of
//! (φ(G)·ψ(C*G^{-1}C))^{1/2}, which for p, q ≥ 2 is a convex problem once the
//! product is traded for the balanced sum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::linalg::{
    conj_exponent, cplx, herm_fn, identity, op_norm, psd_pow, psd_schatten, random_gaussian, random_psd, svd, zeros,
    ComplexMatrix, C64,
};
use crate::optim::es_maximize;
use crate::rng::Budget;
use crate::schatten::{norming_functional, schatten_norm, LpParams, StateDensity};
use crate::states::{col_gram, form_constant, minimize_states, normalize_state, row_gram, uniform_state, StateObjective, StateSolution};
use crate::vv::{column_norm, row_norm, vv_norm, MatrixSubspace, VvElement};

/// x = Σ coeffs[i][j] e_i ⊗ f_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorElement {
    pub left: MatrixSubspace,
    pub right: MatrixSubspace,
    #[serde(with = "crate::json::matrix")]
    pub coeffs: ComplexMatrix,
}

/// u(e_i, f_j) = coeffs[i][j].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearForm {
    pub left: MatrixSubspace,
    pub right: MatrixSubspace,
    #[serde(with = "crate::json::matrix")]
    pub coeffs: ComplexMatrix,
}

fn check_coeffs(left: &MatrixSubspace, right: &MatrixSubspace, coeffs: &ComplexMatrix) -> Result<()> {
    if coeffs.shape() != (left.dim(), right.dim()) {
        return Err(mismatch(format!(
            "coefficients {:?} do not match basis sizes ({}, {})",
            coeffs.shape(),
            left.dim(),
            right.dim()
        )));
    }
    if left.ambient_dim() != right.ambient_dim() {
        return Err(mismatch("both subspaces must live in the same matrix algebra"));
    }
    Ok(())
}

impl TensorElement {
    pub fn new(left: MatrixSubspace, right: MatrixSubspace, coeffs: ComplexMatrix) -> Result<Self> {
        check_coeffs(&left, &right, &coeffs)?;
        Ok(Self { left, right, coeffs })
    }
}

impl BilinearForm {
    pub fn new(left: MatrixSubspace, right: MatrixSubspace, coeffs: ComplexMatrix) -> Result<Self> {
        check_coeffs(&left, &right, &coeffs)?;
        Ok(Self { left, right, coeffs })
    }

    pub fn zero(left: MatrixSubspace, right: MatrixSubspace) -> Self {
        let coeffs = zeros(left.dim(), right.dim());
        Self { left, right, coeffs }
    }

    /// u(a, b) for coordinate vectors α, β: α^T U β.
    pub fn eval_coords(&self, alpha: &[C64], beta: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, a) in alpha.iter().enumerate() {
            for (j, b) in beta.iter().enumerate() {
                acc += a * self.coeffs[(i, j)] * b;
            }
        }
        acc
    }

    /// ⟨u, x⟩ = Σ U_ij C_ij.
    pub fn pair(&self, x: &TensorElement) -> Result<C64> {
        if x.coeffs.shape() != self.coeffs.shape() {
            return Err(mismatch("form and tensor have different shapes"));
        }
        Ok(self.coeffs.iter().zip(x.coeffs.iter()).map(|(u, c)| u * c).sum())
    }

    /// The transposed form (b, a) ↦ u(a, b) on F × E.
    pub fn transposed(&self) -> Self {
        Self { left: self.right.clone(), right: self.left.clone(), coeffs: self.coeffs.transpose() }
    }

    pub fn with_coeffs(&self, coeffs: ComplexMatrix) -> Self {
        Self { left: self.left.clone(), right: self.right.clone(), coeffs }
    }
}

/// x = a ⊙ b = Σ_k a_k ⊗ b_k with a a row in R_p[E] and b a column in C_q[F].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationPair {
    #[serde(with = "crate::json::matrix_list")]
    pub a: Vec<ComplexMatrix>,
    #[serde(with = "crate::json::matrix_list")]
    pub b: Vec<ComplexMatrix>,
    /// K_E × n coordinates of the a_k.
    #[serde(with = "crate::json::matrix")]
    pub a_coords: ComplexMatrix,
    /// n × K_F coordinates of the b_k.
    #[serde(with = "crate::json::matrix")]
    pub b_coords: ComplexMatrix,
}

impl FactorizationPair {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// ‖a‖_{R_p[E]}·‖b‖_{C_q[F]}.
    pub fn cost(&self, p: f64, q: f64) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        Ok(row_norm(&self.a, p)? * column_norm(&self.b, q)?)
    }

    /// Coefficients of a ⊙ b.
    pub fn product_coeffs(&self) -> ComplexMatrix {
        &self.a_coords * &self.b_coords
    }
}

fn coords_to_pair(left: &MatrixSubspace, right: &MatrixSubspace, a: ComplexMatrix, b: ComplexMatrix) -> FactorizationPair {
    let n = a.ncols();
    let av = (0..n).map(|k| left.element(a.column(k).as_slice())).collect();
    let bv = (0..n)
        .map(|k| {
            let row: Vec<C64> = b.row(k).iter().copied().collect();
            right.element(&row)
        })
        .collect();
    FactorizationPair { a: av, b: bv, a_coords: a, b_coords: b }
}

/// Surrogate index for the smooth part of the optimization when p = ∞.
const INF_SURROGATE: f64 = 64.0;

fn smooth_index(p: f64) -> f64 {
    if p.is_infinite() { INF_SURROGATE } else { p }
}

/// Value and gradient of G ↦ ‖Σ G_{ii'} e_i e_{i'}^*‖_s (the squared row norm).
fn row_side(space: &MatrixSubspace, g: &ComplexMatrix, s: f64) -> (f64, ComplexMatrix) {
    let m = space.ambient_dim();
    let b = space.basis();
    let mut y = zeros(m, m);
    for i in 0..b.len() {
        for j in 0..b.len() {
            if g[(i, j)] != C64::new(0.0, 0.0) {
                y += &b[i] * b[j].adjoint() * g[(i, j)];
            }
        }
    }
    side_value_grad(space, &y, s, true)
}

/// Value and gradient of H ↦ ‖Σ H_{jj'} f_j^* f_{j'}‖_s (the squared column norm).
fn col_side(space: &MatrixSubspace, h: &ComplexMatrix, s: f64) -> (f64, ComplexMatrix) {
    let m = space.ambient_dim();
    let b = space.basis();
    let mut y = zeros(m, m);
    for i in 0..b.len() {
        for j in 0..b.len() {
            if h[(i, j)] != C64::new(0.0, 0.0) {
                y += b[i].adjoint() * &b[j] * h[(i, j)];
            }
        }
    }
    side_value_grad(space, &y, s, false)
}

fn side_value_grad(space: &MatrixSubspace, y: &ComplexMatrix, s: f64, row: bool) -> (f64, ComplexMatrix) {
    let y = (y + y.adjoint()).scale(0.5);
    let val = psd_schatten(&y, s);
    if val == 0.0 {
        let k = space.dim();
        return (0.0, zeros(k, k));
    }
    // d‖Y‖_s = tr(W dY) with W = (Y/‖Y‖)^{s-1}.
    let w = psd_pow(&y.unscale(val), s - 1.0);
    let gram = if row { row_gram(space, &w) } else { col_gram(space, &w) };
    (val, gram.transpose())
}

struct GramProblem<'a> {
    left: &'a MatrixSubspace,
    right: &'a MatrixSubspace,
    /// Orthonormal basis of range(C), K_E × ρ.
    range: ComplexMatrix,
    /// range^* C, ρ × K_F.
    reduced: ComplexMatrix,
    sp: f64,
    sq: f64,
}

impl GramProblem<'_> {
    /// (φ, ψ, gradient of φ + ψ) at the reduced Gram matrix g.
    fn eval(&self, g: &ComplexMatrix) -> Option<(f64, f64, ComplexMatrix)> {
        let ginv = g.clone().try_inverse()?;
        let full = &self.range * g * self.range.adjoint();
        let (phi, m1) = row_side(self.left, &full, self.sp);
        let h = self.reduced.adjoint() * &ginv * &self.reduced;
        let (psi, m2) = col_side(self.right, &h, self.sq);
        let t = &ginv * &self.reduced * m2 * self.reduced.adjoint() * &ginv;
        let grad = self.range.adjoint() * m1 * &self.range - t;
        Some((phi, psi, (&grad + grad.adjoint()).scale(0.5)))
    }

    fn objective(&self, g: &ComplexMatrix) -> f64 {
        self.eval(g).map_or(f64::INFINITY, |(a, b, _)| a + b)
    }

    /// Riemannian gradient descent on positive definite matrices with Armijo
    /// backtracking and exact scale balancing.
    fn descend(&self, mut g: ComplexMatrix, iterations: usize) -> ComplexMatrix {
        let mut step: f64 = 1.0;
        let mut stalls = 0;
        for _ in 0..iterations {
            let Some((phi, psi, grad)) = self.eval(&g) else { break };
            if phi > 0.0 && psi > 0.0 {
                g = g.scale((psi / phi).sqrt());
            }
            let Some((phi, psi, grad2)) = self.eval(&g).or(Some((phi, psi, grad))) else { break };
            let f0 = phi + psi;
            let half = psd_pow(&g, 0.5);
            let dir = &half * &grad2 * &half;
            let dn2: f64 = dir.iter().map(|z| z.norm_sqr()).sum();
            if dn2.sqrt() <= 1e-14 * f0.max(1e-300) {
                break;
            }
            let mut accepted = false;
            let mut trial_step = (step * 2.0).min(1e3);
            for _ in 0..60 {
                let e = herm_fn(&dir, |l| (-trial_step * l).exp());
                let cand = &half * e * &half;
                let f1 = self.objective(&cand);
                if f1 <= f0 - 1e-4 * trial_step * dn2 {
                    g = (&cand + cand.adjoint()).scale(0.5);
                    step = trial_step;
                    accepted = true;
                    // A single tiny step is common in narrow valleys; stop only on a run of them.
                    stalls = if f0 - f1 <= 1e-14 * f0 { stalls + 1 } else { 0 };
                    if stalls >= 5 {
                        return g;
                    }
                    break;
                }
                trial_step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        g
    }
}

/// Best upper bound found for ‖x‖_{h_{p,q}} and a factorization achieving it.
pub fn hp_norm_primal(x: &TensorElement, p: f64, q: f64, budget: Budget) -> Result<(f64, FactorizationPair)> {
    LpParams::new(p)?;
    LpParams::new(q)?;
    let c = &x.coeffs;
    let (u, s, _) = svd(c);
    let top = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&v| v > 1e-12 * top).count();
    if top == 0.0 || rank == 0 {
        let empty = FactorizationPair {
            a: Vec::new(),
            b: Vec::new(),
            a_coords: zeros(x.left.dim(), 0),
            b_coords: zeros(0, x.right.dim()),
        };
        return Ok((0.0, empty));
    }
    let range = u.columns(0, rank).into_owned();
    let reduced = range.adjoint() * c;
    let prob = GramProblem {
        left: &x.left,
        right: &x.right,
        range,
        reduced,
        sp: smooth_index(p) / 2.0,
        sq: smooth_index(q) / 2.0,
    };

    let mut best: Option<(f64, FactorizationPair)> = None;
    for restart in 0..budget.restarts.max(1) {
        let mut rng = budget.rng(restart as u64);
        let g0 = if restart == 0 { identity(rank) } else { random_psd(&mut rng, rank, 0.05) };
        let g = prob.descend(g0, budget.iterations);
        let l = psd_pow(&g, 0.5);
        let Some(linv) = l.clone().try_inverse() else { continue };
        let mut a = &prob.range * &l;
        let mut b = linv * &prob.reduced;
        let pair = coords_to_pair(&x.left, &x.right, a.clone(), b.clone());
        let (ra, cb) = (row_norm(&pair.a, p)?, column_norm(&pair.b, q)?);
        if ra > 0.0 && cb > 0.0 {
            let t = (cb / ra).sqrt();
            a = a.scale(t);
            b = b.unscale(t);
        }
        let pair = coords_to_pair(&x.left, &x.right, a, b);
        let value = pair.cost(p, q)?;
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, pair));
        }
    }
    best.ok_or_else(|| invalid("optimizer produced no factorization"))
}

/// Which pair of positive functionals a certificate uses:
/// row:    |u(a,b)| ≤ c (f(aa*) g(b*b))^{1/2};
/// column: |u(a,b)| ≤ c (f(a*a) g(bb*))^{1/2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSide {
    Row,
    Column,
}

/// Hermitian form of f on the left side, in the conjugated coordinates ᾱ.
pub fn left_form(side: PairSide, space: &MatrixSubspace, f: &ComplexMatrix) -> ComplexMatrix {
    match side {
        PairSide::Row => row_gram(space, f),
        PairSide::Column => col_gram(space, f).map(|z| z.conj()),
    }
}

/// Hermitian form of g on the right side, in the coordinates β.
pub fn right_form(side: PairSide, space: &MatrixSubspace, g: &ComplexMatrix) -> ComplexMatrix {
    match side {
        PairSide::Row => col_gram(space, g),
        PairSide::Column => row_gram(space, g).map(|z| z.conj()),
    }
}

/// Tag of the inequality a certificate witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// |u(a,b)| ≤ c (f(aa*) g(b*b))^{1/2}.
    RowPair,
    /// |u(a,b)| ≤ c (f(a*a) g(bb*))^{1/2}.
    ColumnPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub value: f64,
    pub f: StateDensity,
    pub g: StateDensity,
    pub kind: CertificateKind,
}

impl Certificate {
    pub fn side(&self) -> PairSide {
        match self.kind {
            CertificateKind::RowPair => PairSide::Row,
            CertificateKind::ColumnPair => PairSide::Column,
        }
    }

    /// The smallest constant valid for `u` with these two functionals.
    pub fn constant_for(&self, u: &BilinearForm) -> f64 {
        pair_constant(u, self.side(), &self.f.density, &self.g.density)
    }

    /// Right-hand side of the witnessed inequality without the constant.
    pub fn bound(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        let (fa, gb) = match self.side() {
            PairSide::Row => (a * a.adjoint(), b.adjoint() * b),
            PairSide::Column => (a.adjoint() * a, b * b.adjoint()),
        };
        let f = crate::linalg::trace(&(&self.f.density * fa)).re.max(0.0);
        let g = crate::linalg::trace(&(&self.g.density * gb)).re.max(0.0);
        (f * g).sqrt()
    }
}

/// Smallest c with |u(a,b)| ≤ c·(f-term · g-term)^{1/2} for given densities.
pub fn pair_constant(u: &BilinearForm, side: PairSide, f: &ComplexMatrix, g: &ComplexMatrix) -> f64 {
    form_constant(&left_form(side, &u.left, f), &u.coeffs, &right_form(side, &u.right, g))
}

struct PairObjective<'a> {
    u: &'a BilinearForm,
    side: PairSide,
}

impl StateObjective for PairObjective<'_> {
    fn num_states(&self) -> usize {
        2
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.u.left.ambient_dim(), self.u.right.ambient_dim()]
    }

    fn value(&self, states: &[ComplexMatrix]) -> f64 {
        pair_constant(self.u, self.side, &states[0], &states[1])
    }

    fn descent(&self, states: &[ComplexMatrix]) -> Option<Vec<ComplexMatrix>> {
        let a_form = left_form(self.side, &self.u.left, &states[0]);
        let b_form = right_form(self.side, &self.u.right, &states[1]);
        let wa = psd_pow(&a_form, -0.5);
        let wb = psd_pow(&b_form, -0.5);
        let (x, s, y) = svd(&(&wa * &self.u.coeffs * &wb));
        if s.first().copied().unwrap_or(0.0) == 0.0 {
            return None;
        }
        let gamma = wa * x.column(0);
        let beta = wb * y.column(0);
        let alpha: Vec<C64> = gamma.iter().map(|z| z.conj()).collect();
        let beta: Vec<C64> = beta.iter().copied().collect();
        let a = self.u.left.element(&alpha);
        let b = self.u.right.element(&beta);
        Some(match self.side {
            PairSide::Row => vec![&a * a.adjoint(), b.adjoint() * &b],
            PairSide::Column => vec![a.adjoint() * &a, &b * b.adjoint()],
        })
    }
}

fn state_exponent(p: f64) -> Result<f64> {
    if p < 2.0 {
        return Err(invalid(format!("state certificates need p ≥ 2, got {p}")));
    }
    Ok(conj_exponent(p / 2.0))
}

/// Minimizes the certificate constant over pairs of positive unit functionals.
pub fn pair_certificate(u: &BilinearForm, side: PairSide, p: f64, budget: Budget) -> Result<Certificate> {
    let r = state_exponent(p)?;
    let kind = match side {
        PairSide::Row => CertificateKind::RowPair,
        PairSide::Column => CertificateKind::ColumnPair,
    };
    let obj = PairObjective { u, side };
    let sol = if op_norm(&u.coeffs) == 0.0 {
        let d = obj.dims();
        StateSolution {
            states: d.iter().map(|&m| uniform_state(m, r)).collect(),
            value: 0.0,
        }
    } else {
        minimize_states(&obj, r, budget, 200)
    };
    Ok(Certificate {
        value: sol.value,
        f: StateDensity { density: sol.states[0].clone(), exponent: r },
        g: StateDensity { density: sol.states[1].clone(), exponent: r },
        kind,
    })
}

/// Row-pair certificate: the smallest c found with
/// |u(a,b)| ≤ c (f(aa*) g(b*b))^{1/2} on E × F.
pub fn hp_dual_certificate(u: &BilinearForm, p: f64, budget: Budget) -> Result<Certificate> {
    pair_certificate(u, PairSide::Row, p, budget)
}

/// Lower bound for ‖x‖_{h_{p,q}} from a pair of functionals:
/// sup over f, g of ‖(P^{1/2})^T C (Q^{1/2})^T‖_1. Any pair gives a valid
/// lower bound; the search maximizes over both.
pub fn hp_norm_dual(x: &TensorElement, p: f64, q: f64, budget: Budget) -> Result<(f64, StateDensity, StateDensity)> {
    let (rp, rq) = (state_exponent(p)?, state_exponent(q)?);
    let obj = DualObjective { x, rq };
    let sol = minimize_states(&obj, rp, budget, 0);
    let g = normalize_state(&sol.states[1], rq);
    let value = dual_pairing_value(x, &sol.states[0], &g);
    Ok((value, StateDensity { density: sol.states[0].clone(), exponent: rp }, StateDensity { density: g, exponent: rq }))
}

struct DualObjective<'a> {
    x: &'a TensorElement,
    /// The right functional lives in the ball of S_{rq}; the solver normalizes
    /// both with the left exponent, so the right one is renormalized here.
    rq: f64,
}

impl StateObjective for DualObjective<'_> {
    fn num_states(&self) -> usize {
        2
    }
    fn dims(&self) -> Vec<usize> {
        vec![self.x.left.ambient_dim(), self.x.right.ambient_dim()]
    }
    fn value(&self, s: &[ComplexMatrix]) -> f64 {
        -dual_pairing_value(self.x, &s[0], &normalize_state(&s[1], self.rq))
    }
}

/// ‖(P^{1/2})^T C (Q^{1/2})^T‖_1 for the row-pair Gram matrices of f and g.
pub fn dual_pairing_value(x: &TensorElement, f: &ComplexMatrix, g: &ComplexMatrix) -> f64 {
    let pt = psd_pow(&row_gram(&x.left, f), 0.5).transpose();
    let qt = psd_pow(&col_gram(&x.right, g), 0.5).transpose();
    schatten_norm(&(pt * &x.coeffs * qt), 1.0).unwrap_or(0.0)
}

/// ũ = i_F^* ∘ û ∘ i_E: u(a,b) = (S_E α)^T Û (S_F β) with ‖S_E α‖², ‖S_F β‖²
/// the Hilbert seminorms induced by the certificate's functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFactorization {
    pub value: f64,
    pub certificate: Certificate,
    #[serde(with = "crate::json::matrix")]
    pub i_e: ComplexMatrix,
    #[serde(with = "crate::json::matrix")]
    pub u_hat: ComplexMatrix,
    #[serde(with = "crate::json::matrix")]
    pub i_f: ComplexMatrix,
    /// Largest entrywise error of S_E^T Û S_F against the coefficients of u.
    pub residual: f64,
}

fn gamma_through(u: &BilinearForm, side: PairSide, p: f64, budget: Budget) -> Result<GammaFactorization> {
    let certificate = pair_certificate(u, side, p, budget)?;
    factor_with(u, certificate)
}

/// Builds the explicit factorization from a certificate.
pub fn factor_with(u: &BilinearForm, certificate: Certificate) -> Result<GammaFactorization> {
    let side = certificate.side();
    let a = left_form(side, &u.left, &certificate.f.density);
    let b = right_form(side, &u.right, &certificate.g.density);
    let i_e = psd_pow(&a, 0.5).transpose();
    let i_f = psd_pow(&b, 0.5);
    let u_hat = psd_pow(&a, -0.5) * &u.coeffs * psd_pow(&b, -0.5);
    let recon = i_e.transpose() * &u_hat * &i_f;
    let residual = crate::linalg::max_abs_diff(&recon, &u.coeffs);
    Ok(GammaFactorization { value: op_norm(&u_hat), certificate, i_e, u_hat, i_f, residual })
}

/// Factorization of ũ: E → F* through a p-row space.
pub fn gamma_rp(u: &BilinearForm, p: f64, budget: Budget) -> Result<GammaFactorization> {
    gamma_through(u, PairSide::Row, p, budget)
}

/// Factorization of ũ: E → F* through a p-column space.
pub fn gamma_cp(u: &BilinearForm, p: f64, budget: Budget) -> Result<GammaFactorization> {
    gamma_through(u, PairSide::Column, p, budget)
}

fn coords_from(params: &[f64], k: usize, n: usize, offset: usize) -> Vec<ComplexMatrix> {
    (0..k)
        .map(|l| {
            ComplexMatrix::from_fn(n, n, |i, j| {
                let o = offset + 2 * (l * n * n + i * n + j);
                cplx(params[o], params[o + 1])
            })
        })
        .collect()
}

/// Largest observed ‖(Σ_k u(a_ik, b_kj))_{ij}‖_{S_r^n} / (‖a‖_{S_p^n[E]} ‖b‖_{S_q^n[F]})
/// with 1/r = 1/p + 1/q: a lower estimate of the (p,q)-multiplicative norm.
pub fn mb_norm_check(u: &BilinearForm, p: f64, q: f64, n: usize, budget: Budget) -> Result<f64> {
    LpParams::new(p)?;
    LpParams::new(q)?;
    if n == 0 {
        return Err(invalid("level must be at least 1"));
    }
    let inv_r = (if p.is_infinite() { 0.0 } else { 1.0 / p }) + if q.is_infinite() { 0.0 } else { 1.0 / q };
    let r = if inv_r == 0.0 { f64::INFINITY } else { 1.0 / inv_r };
    let (ke, kf) = (u.left.dim(), u.right.dim());
    if op_norm(&u.coeffs) == 0.0 {
        return Ok(0.0);
    }
    let ratio = |params: &[f64]| -> f64 {
        let xa = coords_from(params, ke, n, 0);
        let xb = coords_from(params, kf, n, 2 * ke * n * n);
        let mut out = zeros(n, n);
        for (l, al) in xa.iter().enumerate() {
            for (m, bm) in xb.iter().enumerate() {
                let c = u.coeffs[(l, m)];
                if c != C64::new(0.0, 0.0) {
                    out += al * bm * c;
                }
            }
        }
        let na = VvElement::from_coordinates(&u.left, &xa).and_then(|x| vv_norm(&x, p));
        let nb = VvElement::from_coordinates(&u.right, &xb).and_then(|x| vv_norm(&x, q));
        match (na, nb, schatten_norm(&out, r)) {
            (Ok(a), Ok(b), Ok(v)) if a > 1e-300 && b > 1e-300 => v / (a * b),
            _ => f64::NEG_INFINITY,
        }
    };
    let dim = 2 * (ke + kf) * n * n;
    let mut best = f64::NEG_INFINITY;
    for restart in 0..budget.restarts.max(1) {
        let mut rng = budget.rng(restart as u64);
        let x0: Vec<f64> = random_gaussian(&mut rng, dim, 1).iter().map(|z| z.re).collect();
        let mut f = |v: &[f64]| ratio(v);
        let (_, v) = es_maximize(&mut f, &x0, 0.3, budget.iterations, &mut rng);
        best = best.max(v);
    }
    Ok(best.max(0.0))
}

/// Lower bound for the injective (Banach) tensor norm of x:
/// sup |Σ C_ij ξ(e_i) η(f_j)| over norm-one functionals on L_p, L_q,
/// by alternating exact norming functionals.
pub fn injective_norm_lower(x: &TensorElement, p: f64, q: f64, budget: Budget) -> Result<f64> {
    LpParams::new(p)?;
    LpParams::new(q)?;
    let c = &x.coeffs;
    if op_norm(c) == 0.0 {
        return Ok(0.0);
    }
    let pair = |y: &ComplexMatrix, z: &ComplexMatrix| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, ei) in x.left.basis().iter().enumerate() {
            let yi = crate::linalg::trace(&(y * ei));
            for (j, fj) in x.right.basis().iter().enumerate() {
                acc += c[(i, j)] * yi * crate::linalg::trace(&(z * fj));
            }
        }
        acc
    };
    let m = x.right.ambient_dim();
    let mut best = 0.0f64;
    for restart in 0..budget.restarts.max(1) {
        let mut rng = budget.rng(restart as u64);
        let mut z = norming_functional(&random_gaussian(&mut rng, m, m), conj_exponent(q))?;
        let mut y;
        let mut val = 0.0f64;
        for _ in 0..budget.iterations.min(200) {
            let zv: Vec<C64> = x.right.basis().iter().map(|f| crate::linalg::trace(&(&z * f))).collect();
            let w: Vec<C64> = (0..x.left.dim()).map(|i| (0..zv.len()).map(|j| c[(i, j)] * zv[j]).sum()).collect();
            y = norming_functional(&x.left.element(&w), p)?;
            let yv: Vec<C64> = x.left.basis().iter().map(|e| crate::linalg::trace(&(&y * e))).collect();
            let v: Vec<C64> = (0..x.right.dim()).map(|j| (0..yv.len()).map(|i| c[(i, j)] * yv[i]).sum()).collect();
            z = norming_functional(&x.right.element(&v), q)?;
            let next = pair(&y, &z).norm();
            let done = next - val <= 1e-12 * next;
            val = val.max(next);
            if done {
                break;
            }
        }
        best = best.max(val);
    }
    Ok(best)
}
