//! Vector-valued Schatten norms: S_p^n[E], the column/row square functions,
//! the S_p[C_q] norm and an amplification estimator for cb-norms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{
    conj_exponent, cplx, eigh, frob_inner, frob_norm, identity, lp_of, psd_pow, psd_schatten, random_gaussian,
    random_psd, trace, unit, zeros, ComplexMatrix, C64,
};
use crate::optim::es_maximize;
use crate::rng::Budget;
use crate::schatten::{schatten_norm, LpParams};

/// Ordered basis of a subspace E of m×m matrices, with the L_p index it is
/// normed by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRepr", into = "SubspaceRepr")]
pub struct MatrixSubspace {
    ambient_dim: usize,
    p: f64,
    basis: Vec<ComplexMatrix>,
    condition: f64,
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    ambient_dim: usize,
    #[serde(with = "crate::json::exponent")]
    p: f64,
    #[serde(with = "crate::json::matrix_list")]
    basis: Vec<ComplexMatrix>,
}

impl TryFrom<SubspaceRepr> for MatrixSubspace {
    type Error = Error;
    fn try_from(r: SubspaceRepr) -> Result<Self> {
        MatrixSubspace::new(r.ambient_dim, r.p, r.basis)
    }
}

impl From<MatrixSubspace> for SubspaceRepr {
    fn from(s: MatrixSubspace) -> Self {
        SubspaceRepr { ambient_dim: s.ambient_dim, p: s.p, basis: s.basis }
    }
}

impl MatrixSubspace {
    pub fn new(ambient_dim: usize, p: f64, basis: Vec<ComplexMatrix>) -> Result<Self> {
        LpParams::new(p)?;
        if ambient_dim == 0 {
            return Err(invalid("ambient dimension must be positive"));
        }
        if basis.is_empty() {
            return Err(invalid("a subspace needs at least one basis element"));
        }
        for (i, b) in basis.iter().enumerate() {
            if b.shape() != (ambient_dim, ambient_dim) {
                return Err(mismatch(format!(
                    "basis element {i} is {:?}, expected {ambient_dim}x{ambient_dim}",
                    b.shape()
                )));
            }
        }
        let k = basis.len();
        let gram = ComplexMatrix::from_fn(k, k, |i, j| frob_inner(&basis[i], &basis[j]));
        let vals = eigh(&gram).0;
        let (lo, hi) = (vals[0], vals[k - 1]);
        if hi <= 0.0 || lo <= 1e-12 * hi {
            return Err(Error::Degenerate(format!(
                "basis is linearly dependent (Gram eigenvalues {lo:e} .. {hi:e})"
            )));
        }
        Ok(Self { ambient_dim, p, basis, condition: hi / lo })
    }

    /// span{e_11, …, e_mm}.
    pub fn diagonal(m: usize, p: f64) -> Result<Self> {
        Self::new(m, p, (0..m).map(|i| unit(m, i, i)).collect())
    }

    /// All of M_m, spanned by the matrix units in row-major order.
    pub fn full(m: usize, p: f64) -> Result<Self> {
        Self::new(m, p, (0..m * m).map(|k| unit(m, k / m, k % m)).collect())
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Condition number of the Gram matrix of the vectorized basis.
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Same basis, different norm index.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.ambient_dim, p, self.basis.clone())
    }

    /// Σ_i c_i e_i.
    pub fn element(&self, coords: &[C64]) -> ComplexMatrix {
        let m = self.ambient_dim;
        let mut x = zeros(m, m);
        for (c, b) in coords.iter().zip(&self.basis) {
            x += b * *c;
        }
        x
    }

    /// Least-squares coordinates of `x` and the Frobenius residual.
    pub fn coordinates(&self, x: &ComplexMatrix) -> Result<(Vec<C64>, f64)> {
        if x.shape() != (self.ambient_dim, self.ambient_dim) {
            return Err(mismatch(format!("element {:?} not in {}x{} matrices", x.shape(), self.ambient_dim, self.ambient_dim)));
        }
        let k = self.dim();
        let gram = ComplexMatrix::from_fn(k, k, |i, j| frob_inner(&self.basis[i], &self.basis[j]));
        let rhs = ComplexMatrix::from_fn(k, 1, |i, _| frob_inner(&self.basis[i], x));
        let sol = gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular Gram matrix".into()))?;
        let coords: Vec<C64> = sol.iter().copied().collect();
        let residual = frob_norm(&(x - self.element(&coords)));
        Ok((coords, residual))
    }
}

/// An element of M_n(E): an n×n array of m×m blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VvElement {
    #[serde(with = "crate::json::matrix_grid")]
    blocks: Vec<Vec<ComplexMatrix>>,
}

impl VvElement {
    pub fn new(blocks: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let n = blocks.len();
        if n == 0 {
            return Err(invalid("empty block array"));
        }
        let shape = blocks[0].first().map(|b| b.shape()).ok_or_else(|| invalid("empty block row"))?;
        if shape.0 != shape.1 {
            return Err(mismatch(format!("blocks must be square, got {shape:?}")));
        }
        for (i, row) in blocks.iter().enumerate() {
            if row.len() != n {
                return Err(mismatch(format!("block row {i} has {} entries, expected {n}", row.len())));
            }
            if let Some(b) = row.iter().find(|b| b.shape() != shape) {
                return Err(mismatch(format!("ragged blocks: {:?} vs {shape:?}", b.shape())));
            }
        }
        Ok(Self { blocks })
    }

    /// Σ_i X_i ⊗ e_i for coordinate matrices X_i (n×n) against the basis of E.
    pub fn from_coordinates(space: &MatrixSubspace, coords: &[ComplexMatrix]) -> Result<Self> {
        if coords.len() != space.dim() {
            return Err(mismatch(format!("{} coordinate matrices for a {}-dim subspace", coords.len(), space.dim())));
        }
        let n = coords[0].nrows();
        let blocks = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let c: Vec<C64> = coords.iter().map(|x| x[(a, b)]).collect();
                        space.element(&c)
                    })
                    .collect()
            })
            .collect();
        Self::new(blocks)
    }

    pub fn level(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dim(&self) -> usize {
        self.blocks[0][0].nrows()
    }

    pub fn blocks(&self) -> &[Vec<ComplexMatrix>] {
        &self.blocks
    }

    /// The nm×nm matrix with block (i, j) = x_ij.
    pub fn flatten(&self) -> ComplexMatrix {
        let (n, m) = (self.level(), self.block_dim());
        ComplexMatrix::from_fn(n * m, n * m, |r, c| self.blocks[r / m][c / m][(r % m, c % m)])
    }

    /// Largest Frobenius distance of a block from `space`.
    pub fn residual_from(&self, space: &MatrixSubspace) -> Result<f64> {
        let mut worst = 0.0f64;
        for row in &self.blocks {
            for b in row {
                worst = worst.max(space.coordinates(b)?.1);
            }
        }
        Ok(worst)
    }
}

pub fn vv_norm(x: &VvElement, p: f64) -> Result<f64> {
    schatten_norm(&x.flatten(), p)
}

fn common_shape(xs: &[ComplexMatrix]) -> Result<Option<(usize, usize)>> {
    let Some(first) = xs.first() else { return Ok(None) };
    if let Some(bad) = xs.iter().find(|x| x.shape() != first.shape()) {
        return Err(mismatch(format!("sequence mixes shapes {:?} and {:?}", first.shape(), bad.shape())));
    }
    Ok(Some(first.shape()))
}

/// ‖(Σ x_k* x_k)^{1/2}‖_p.
pub fn column_norm(xs: &[ComplexMatrix], p: f64) -> Result<f64> {
    LpParams::new(p)?;
    let Some((_, c)) = common_shape(xs)? else { return Ok(0.0) };
    let mut s = zeros(c, c);
    for x in xs {
        s += x.adjoint() * x;
    }
    Ok(psd_schatten(&s, p / 2.0).sqrt())
}

/// ‖(Σ x_k x_k*)^{1/2}‖_p.
pub fn row_norm(xs: &[ComplexMatrix], p: f64) -> Result<f64> {
    LpParams::new(p)?;
    let Some((r, _)) = common_shape(xs)? else { return Ok(0.0) };
    let mut s = zeros(r, r);
    for x in xs {
        s += x * x.adjoint();
    }
    Ok(psd_schatten(&s, p / 2.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcqResult {
    pub value: f64,
    #[serde(with = "crate::json::matrix")]
    pub alpha: ComplexMatrix,
    #[serde(with = "crate::json::matrix")]
    pub beta: ComplexMatrix,
    pub iterations: usize,
}

/// Maximizer of tr(A·h) over positive A with ‖A‖_t ≤ 1, for h ≥ 0.
fn positive_best_response(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let n = h.nrows();
    if t.is_infinite() {
        return identity(n);
    }
    let tc = conj_exponent(t);
    let (vals, v) = eigh(h);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        // h = 0: any unit element is optimal.
        return identity(n).scale((n as f64).powf(-1.0 / t));
    }
    if tc.is_infinite() {
        let e = v.column(n - 1).into_owned();
        return &e * e.adjoint();
    }
    let a = psd_pow(h, tc - 1.0);
    let norm = psd_schatten(&a, t);
    a.unscale(norm)
}

fn spcq_objective(xs: &[ComplexMatrix], a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    xs.iter().map(|x| trace(&(a * x * b * x.adjoint())).re).sum()
}

/// Norm of Σ x_k ⊗ e_k in S_p[C_q], 1/q = (1−θ)/p + θ/p', as the supremum of
/// (Σ ‖α x_k β‖_2²)^{1/2} over positive α, β in the balls of S_{2r/θ} and
/// S_{2r/(1−θ)}. Alternating exact best responses; the best of `restarts`
/// starts (the first is the uniform start) is returned.
pub fn spcq_norm(xs: &[ComplexMatrix], params: LpParams, budget: Budget) -> Result<SpcqResult> {
    let theta = params.theta.ok_or_else(|| invalid("S_p[C_q] norm needs θ"))?;
    if params.p <= 2.0 {
        return Err(invalid(format!("S_p[C_q] norm needs p > 2, got {}", params.p)));
    }
    let (rows, cols) = common_shape(xs)?.ok_or_else(|| invalid("empty sequence"))?;
    let r = params.r().expect("p > 2");
    // A = α², B = β²: ‖A‖_{r/θ} ≤ 1 and ‖B‖_{r/(1−θ)} ≤ 1.
    let a_exp = if theta == 0.0 { f64::INFINITY } else { r / theta };
    let b_exp = if theta == 1.0 { f64::INFINITY } else { r / (1.0 - theta) };

    let mut best: Option<(f64, ComplexMatrix, ComplexMatrix, usize)> = None;
    for restart in 0..budget.restarts.max(1) {
        let mut rng = budget.rng(restart as u64);
        let mut b = if restart == 0 {
            positive_best_response(&zeros(cols, cols), b_exp)
        } else {
            let w = random_psd(&mut rng, cols, 0.0);
            let nrm = psd_schatten(&w, b_exp).max(1e-300);
            w.unscale(nrm)
        };
        let mut a = zeros(rows, rows);
        let mut val = 0.0f64;
        let mut iters = 0;
        for it in 0..budget.iterations.max(1) {
            iters = it + 1;
            let mut h = zeros(rows, rows);
            for x in xs {
                h += x * &b * x.adjoint();
            }
            a = positive_best_response(&hermitize(h), a_exp);
            let mut k = zeros(cols, cols);
            for x in xs {
                k += x.adjoint() * &a * x;
            }
            b = positive_best_response(&hermitize(k), b_exp);
            let next = spcq_objective(xs, &a, &b);
            let done = next - val <= 1e-10 * next.abs().max(1e-300);
            val = val.max(next);
            if done {
                break;
            }
        }
        if best.as_ref().is_none_or(|(v, ..)| val > *v) {
            best = Some((val, a, b, iters));
        }
    }
    let (val, a, b, iterations) = best.expect("at least one restart");
    Ok(SpcqResult { value: val.max(0.0).sqrt(), alpha: psd_pow(&a, 0.5), beta: psd_pow(&b, 0.5), iterations })
}

fn hermitize(h: ComplexMatrix) -> ComplexMatrix {
    (&h + h.adjoint()).scale(0.5)
}

/// Where a linear map on a matrix subspace lands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Codomain {
    /// Another matrix subspace, normed as a subspace of L_p.
    Subspace { space: MatrixSubspace },
    /// The p-column space C_p^d.
    Column { dim: usize },
    /// The p-row space R_p^d.
    Row { dim: usize },
    /// The column space C_q^d with 1/q = (1−θ)/p + θ/p'.
    ColumnQ { dim: usize, theta: f64 },
}

impl Codomain {
    pub fn dim(&self) -> usize {
        match self {
            Codomain::Subspace { space } => space.dim(),
            Codomain::Column { dim } | Codomain::Row { dim } | Codomain::ColumnQ { dim, .. } => *dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMapOnSubspace {
    pub domain: MatrixSubspace,
    pub codomain: Codomain,
    /// (codomain dim) × (domain dim) matrix acting on coordinates.
    #[serde(with = "crate::json::matrix")]
    pub coeffs: ComplexMatrix,
}

impl LinearMapOnSubspace {
    pub fn new(domain: MatrixSubspace, codomain: Codomain, coeffs: ComplexMatrix) -> Result<Self> {
        let want = (codomain.dim(), domain.dim());
        if coeffs.shape() != want {
            return Err(mismatch(format!("coefficient matrix is {:?}, expected {want:?}", coeffs.shape())));
        }
        if let Codomain::ColumnQ { theta, .. } = codomain {
            if !(0.0..=1.0).contains(&theta) {
                return Err(invalid(format!("θ = {theta} must lie in [0, 1]")));
            }
        }
        Ok(Self { domain, codomain, coeffs })
    }

    /// Norm of (I ⊗ u)(x) at level n, x given by coordinate matrices.
    fn image_norm(&self, xs: &[ComplexMatrix], p: f64, inner: Budget) -> Result<f64> {
        let n = xs[0].nrows();
        let ys: Vec<ComplexMatrix> = (0..self.codomain.dim())
            .map(|j| {
                let mut y = zeros(n, n);
                for (i, x) in xs.iter().enumerate() {
                    y += x * self.coeffs[(j, i)];
                }
                y
            })
            .collect();
        match &self.codomain {
            Codomain::Subspace { space } => vv_norm(&VvElement::from_coordinates(space, &ys)?, p),
            Codomain::Column { .. } => column_norm(&ys, p),
            Codomain::Row { .. } => row_norm(&ys, p),
            Codomain::ColumnQ { theta, .. } => {
                if *theta == 0.0 {
                    column_norm(&ys, p)
                } else if *theta == 1.0 {
                    row_norm(&ys, p)
                } else {
                    Ok(spcq_norm(&ys, LpParams::with_theta(p, *theta)?, inner)?.value)
                }
            }
        }
    }
}

fn unpack(params: &[f64], k: usize, n: usize) -> Vec<ComplexMatrix> {
    (0..k)
        .map(|i| {
            ComplexMatrix::from_fn(n, n, |a, b| {
                let o = 2 * (i * n * n + a * n + b);
                cplx(params[o], params[o + 1])
            })
        })
        .collect()
}

fn pack(xs: &[ComplexMatrix]) -> Vec<f64> {
    let mut out = Vec::new();
    for x in xs {
        let n = x.nrows();
        for a in 0..n {
            for b in 0..n {
                out.push(x[(a, b)].re);
                out.push(x[(a, b)].im);
            }
        }
    }
    out
}

/// Structured starting points at level n: the transpose-type and diagonal
/// spreads that typically witness the gap between norm and cb-norm.
fn structured_starts(k: usize, n: usize, coeff_dirs: &ComplexMatrix) -> Vec<Vec<ComplexMatrix>> {
    let mut starts = Vec::new();
    for col in 0..coeff_dirs.ncols() {
        starts.push((0..k).map(|i| unit(n, 0, 0) * coeff_dirs[(i, col)]).collect());
        starts.push((0..k).map(|i| identity(n) * coeff_dirs[(i, col)]).collect());
    }
    if n > 1 {
        starts.push((0..k).map(|i| unit(n, 0, i % n)).collect());
        starts.push((0..k).map(|i| unit(n, i % n, 0)).collect());
        starts.push((0..k).map(|i| unit(n, i % n, i % n)).collect());
        starts.push((0..k).map(|i| unit(n, i % n, (i + 1) % n)).collect());
    }
    starts
}

/// Lower estimates of ‖I_{S_p^n} ⊗ u‖ for n = 1..=levels, made nondecreasing
/// by running maxima (a level-n witness embeds into level n+1).
pub fn cb_norm_estimate(u: &LinearMapOnSubspace, p: f64, levels: usize, budget: Budget) -> Result<Vec<f64>> {
    LpParams::new(p)?;
    if levels == 0 {
        return Err(invalid("level cap must be at least 1"));
    }
    let k = u.domain.dim();
    let inner = Budget::new(2, 200, budget.seed);
    if u.coeffs.iter().all(|z| z.norm() == 0.0) {
        return Ok(vec![0.0; levels]);
    }
    let dirs = {
        let (_, _, v) = crate::linalg::svd(&u.coeffs);
        v
    };
    let mut out = Vec::with_capacity(levels);
    let mut running = 0.0f64;
    for n in 1..=levels {
        let ratio = |xs: &[ComplexMatrix]| -> f64 {
            let den = match VvElement::from_coordinates(&u.domain, xs).and_then(|x| vv_norm(&x, p)) {
                Ok(d) if d > 1e-300 => d,
                _ => return f64::NEG_INFINITY,
            };
            u.image_norm(xs, p, inner).map_or(f64::NEG_INFINITY, |v| v / den)
        };
        let mut starts = structured_starts(k, n, &dirs);
        let mut rng = budget.rng(1000 + n as u64);
        for _ in 0..budget.restarts {
            starts.push((0..k).map(|_| random_gaussian(&mut rng, n, n)).collect());
        }
        let mut best = f64::NEG_INFINITY;
        let mut scored: Vec<(f64, Vec<ComplexMatrix>)> = starts.into_iter().map(|s| (ratio(&s), s)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (v, _) in &scored {
            best = best.max(*v);
        }
        // Climb from the most promising starts.
        let climbs = scored.len().min(4 + budget.restarts / 4);
        for (_, s) in scored.into_iter().take(climbs) {
            let mut f = |v: &[f64]| ratio(&unpack(v, k, n));
            let (_, v) = es_maximize(&mut f, &pack(&s), 0.3, budget.iterations, &mut rng);
            best = best.max(v);
        }
        running = running.max(best);
        out.push(running);
    }
    Ok(out)
}

/// Output of the multiplication map x ↦ (I⊗a) x (I⊗b).
#[derive(Debug, Clone, PartialEq)]
pub struct MultMapResult {
    pub element: VvElement,
    /// n^{1/r}·‖a‖_{2r}·‖b‖_{2r} with 1/p = 1/q + 1/r, n the level. The
    /// outer index drops from q to p as well, which costs n^{1/r} (sharp at x = I).
    pub bound_factor: f64,
    /// Whether a and b lie in the unit ball of S_{2r} (the intended regime).
    pub contractive: bool,
}

/// (I⊗a)·x·(I⊗b) blockwise, mapping S_q^n[L_q] into S_p^n[L_p] for p ≤ q.
pub fn mult_map(a: &ComplexMatrix, x: &VvElement, b: &ComplexMatrix, p: f64, q: f64) -> Result<MultMapResult> {
    LpParams::new(p)?;
    LpParams::new(q)?;
    if p > q {
        return Err(invalid(format!("source index p = {p} must not exceed target index q = {q}")));
    }
    let m = x.block_dim();
    if a.shape() != (m, m) || b.shape() != (m, m) {
        return Err(mismatch(format!("multipliers {:?}, {:?} vs blocks {m}x{m}", a.shape(), b.shape())));
    }
    let inv_r = 1.0 / p - if q.is_infinite() { 0.0 } else { 1.0 / q };
    let two_r = if inv_r == 0.0 { f64::INFINITY } else { 2.0 / inv_r };
    let blocks = x.blocks().iter().map(|row| row.iter().map(|blk| a * blk * b).collect()).collect();
    let (na, nb) = (schatten_norm(a, two_r)?, schatten_norm(b, two_r)?);
    Ok(MultMapResult {
        element: VvElement::new(blocks)?,
        bound_factor: (x.level() as f64).powf(inv_r) * na * nb,
        contractive: na <= 1.0 + 1e-12 && nb <= 1.0 + 1e-12,
    })
}

/// (Σ_k ‖x_k‖_p^p)^{1/p}; dominated by both square functions for p ≥ 2.
pub fn lp_sum_norm(xs: &[ComplexMatrix], p: f64) -> Result<f64> {
    let norms = xs.iter().map(|x| schatten_norm(x, p)).collect::<Result<Vec<_>>>()?;
    Ok(lp_of(&norms, p))
}

/// Random element of span(E) with Gaussian coordinates.
pub fn random_element<R: Rng + ?Sized>(space: &MatrixSubspace, rng: &mut R) -> ComplexMatrix {
    let c = random_gaussian(rng, space.dim(), 1);
    space.element(c.as_slice())
}
