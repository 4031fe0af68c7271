//! Schur multipliers x ↦ (φ_ij x_ij) between Schatten classes: a lower
//! estimate of the S_p → S_q norm, the ℓ_r(ℓ_∞) + ᵗℓ_r(ℓ_∞) splitting that
//! bounds it from above, and the rank-one domination |φ_ij| ≤ α_i β_j.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::linalg::{conj_exponent, cplx, kron, lp_of, random_gaussian, ComplexMatrix, C64};
use crate::optim::{es_maximize, nelder_mead_polish};
use crate::rng::Budget;
use crate::schatten::{norming_functional, schatten_norm};

/// Symbol φ on an n×n grid, optionally restricted to a support Λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskRepr", into = "MaskRepr")]
pub struct MultiplierMask {
    phi: ComplexMatrix,
    support: Option<BTreeSet<(usize, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    #[serde(with = "crate::json::matrix")]
    phi: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<Vec<[usize; 2]>>,
}

impl TryFrom<MaskRepr> for MultiplierMask {
    type Error = crate::error::Error;

    fn try_from(r: MaskRepr) -> Result<Self> {
        let support = r.support.map(|s| s.into_iter().map(|[i, j]| (i, j)).collect());
        Self::with_support(r.phi, support)
    }
}

impl From<MultiplierMask> for MaskRepr {
    fn from(m: MultiplierMask) -> Self {
        MaskRepr { phi: m.phi, support: m.support.map(|s| s.into_iter().map(|(i, j)| [i, j]).collect()) }
    }
}

impl MultiplierMask {
    pub fn new(phi: ComplexMatrix) -> Result<Self> {
        Self::with_support(phi, None)
    }

    pub fn with_support(phi: ComplexMatrix, support: Option<BTreeSet<(usize, usize)>>) -> Result<Self> {
        let n = phi.nrows();
        if phi.ncols() != n {
            return Err(mismatch(format!("symbol must be square, got {:?}", phi.shape())));
        }
        if phi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("symbol has non-finite entries"));
        }
        if let Some(s) = &support {
            if let Some((i, j)) = s.iter().find(|(i, j)| *i >= n || *j >= n) {
                return Err(invalid(format!("support entry ({i}, {j}) outside the {n}×{n} grid")));
            }
            for i in 0..n {
                for j in 0..n {
                    if !s.contains(&(i, j)) && phi[(i, j)].norm() > 0.0 {
                        return Err(invalid(format!("symbol is nonzero at ({i}, {j}) outside the support")));
                    }
                }
            }
        }
        Ok(Self { phi, support })
    }

    pub fn phi(&self) -> &ComplexMatrix {
        &self.phi
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn support(&self) -> Option<&BTreeSet<(usize, usize)>> {
        self.support.as_ref()
    }

    pub fn in_support(&self, i: usize, j: usize) -> bool {
        self.support.as_ref().is_none_or(|s| s.contains(&(i, j)))
    }

    fn support_list(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| self.in_support(i, j)).collect()
    }

    pub fn transposed(&self) -> Self {
        Self {
            phi: self.phi.transpose(),
            support: self.support.as_ref().map(|s| s.iter().map(|&(i, j)| (j, i)).collect()),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { phi: self.phi.scale(c), support: self.support.clone() }
    }

    /// The same symbol on the full grid (zero off the support).
    pub fn zero_extension(&self) -> Self {
        Self { phi: self.phi.clone(), support: None }
    }

    fn moduli(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.phi[(i, j)].norm()).collect()).collect()
    }
}

pub fn schur_apply(mask: &MultiplierMask, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = mask.n();
    if x.shape() != (n, n) {
        return Err(mismatch(format!("symbol is {n}×{n}, matrix is {:?}", x.shape())));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| if mask.in_support(i, j) { mask.phi[(i, j)] * x[(i, j)] } else { cplx(0.0, 0.0) }))
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&q) || !(p >= 2.0) {
        return Err(invalid(format!("need 1 ≤ q ≤ 2 ≤ p ≤ ∞, got p = {p}, q = {q}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchurNormEstimate {
    pub value: f64,
    #[serde(with = "crate::json::matrix")]
    pub maximizer: ComplexMatrix,
}

fn ratio(mask: &MultiplierMask, x: &ComplexMatrix, p: f64, q: f64) -> f64 {
    let nx = schatten_norm(x, p).unwrap_or(0.0);
    if !(nx > 0.0) {
        return f64::NEG_INFINITY;
    }
    schur_apply(mask, x).ok().and_then(|y| schatten_norm(&y, q).ok()).map_or(f64::NEG_INFINITY, |v| v / nx)
}

fn restrict(mask: &MultiplierMask, x: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(x.nrows(), x.ncols(), |i, j| if mask.in_support(i, j) { x[(i, j)] } else { cplx(0.0, 0.0) })
}

/// Lower estimate of ‖M_φ: S_p^Λ → S_q‖: alternating exact best responses in
/// the bilinear form Σ φ_ij x_ij y_ij, then a direct ascent on the ratio.
pub fn schur_norm(mask: &MultiplierMask, p: f64, q: f64, budget: Budget) -> Result<SchurNormEstimate> {
    check_pq(p, q)?;
    let n = mask.n();
    let cells = mask.support_list();
    if n == 0 || cells.is_empty() || mask.phi.iter().all(|z| z.norm() == 0.0) {
        return Ok(SchurNormEstimate { value: 0.0, maximizer: ComplexMatrix::zeros(n, n) });
    }
    let pc = conj_exponent(p);
    let from_params = |v: &[f64]| {
        let mut x = ComplexMatrix::zeros(n, n);
        for (k, &(i, j)) in cells.iter().enumerate() {
            x[(i, j)] = cplx(v[2 * k], v[2 * k + 1]);
        }
        x
    };
    let to_params = |x: &ComplexMatrix| cells.iter().flat_map(|&(i, j)| [x[(i, j)].re, x[(i, j)].im]).collect::<Vec<f64>>();

    let mut best = SchurNormEstimate { value: f64::NEG_INFINITY, maximizer: ComplexMatrix::zeros(n, n) };
    for restart in 0..budget.restarts.max(1) {
        let mut rng = budget.rng(restart as u64);
        let mut x = if restart == 0 {
            restrict(mask, &mask.phi.map(|z| z.conj()))
        } else {
            restrict(mask, &random_gaussian(&mut rng, n, n))
        };
        let mut val = ratio(mask, &x, p, q);
        for _ in 0..budget.iterations.min(200) {
            // y norms φ∘x in S_q; then x norms φ∘y in S_{p'} (projected to Λ).
            let w = schur_apply(mask, &x)?;
            let y = norming_functional(&w.transpose(), q)?;
            let z = schur_apply(mask, &y)?;
            let next = restrict(mask, &norming_functional(&z.transpose(), pc)?);
            let v = ratio(mask, &next, p, q);
            if !(v > val * (1.0 + 1e-13)) {
                if v > val {
                    x = next;
                    val = v;
                }
                break;
            }
            x = next;
            val = v;
        }
        let mut f = |v: &[f64]| ratio(mask, &from_params(v), p, q);
        let (v1, w1) = es_maximize(&mut f, &to_params(&x), 0.05, budget.iterations, &mut rng);
        let mut neg = |v: &[f64]| -f(v);
        let (v2, w2) = nelder_mead_polish(&mut neg, &v1, 0.02, 3, 60 * cells.len());
        let (xv, xval) = if -w2 > w1 { (v2, -w2) } else { (v1, w1) };
        let (cand, cval) = if xval > val { (from_params(&xv), xval) } else { (x, val) };
        if cval > best.value {
            let s = schatten_norm(&cand, p)?;
            best = SchurNormEstimate { value: cval, maximizer: cand.map(|z| z / cplx(s, 0.0)) };
        }
    }
    Ok(best)
}

/// ‖φ‖_{ℓ_r(ℓ_∞)} = (Σ_i sup_j |φ_ij|^r)^{1/r}.
pub fn lr_linf_norm(phi: &ComplexMatrix, r: f64) -> f64 {
    let rows: Vec<f64> = (0..phi.nrows()).map(|i| (0..phi.ncols()).fold(0.0f64, |m, j| m.max(phi[(i, j)].norm()))).collect();
    lp_of(&rows, r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    #[serde(with = "crate::json::matrix")]
    pub phi1: ComplexMatrix,
    #[serde(with = "crate::json::matrix")]
    pub phi2: ComplexMatrix,
    /// ‖φ1‖_{ℓ_r(ℓ_∞)} + ‖ᵗφ2‖_{ℓ_r(ℓ_∞)}.
    pub objective: f64,
}

/// With row bounds R fixed, the cheapest column part has column bounds
/// C_j = max_i (|φ_ij| − R_i)_+; the objective is convex in R.
fn split_cost(a: &[Vec<f64>], rb: &[f64], r: f64) -> f64 {
    let n = a.len();
    let cols: Vec<f64> = (0..n).map(|j| (0..n).fold(0.0f64, |m, i| m.max(a[i][j] - rb[i]))).collect();
    lp_of(rb, r) + lp_of(&cols, r)
}

/// Minimizes the cost over row bounds in [0, row max]; returns (bounds, cost).
fn solve_row_bounds(a: &[Vec<f64>], r: f64, budget: Budget) -> (Vec<f64>, f64) {
    let n = a.len();
    let row_max: Vec<f64> = a.iter().map(|row| row.iter().fold(0.0f64, |m, v| m.max(*v))).collect();
    let clamp = |x: &[f64]| -> Vec<f64> { x.iter().zip(&row_max).map(|(v, m)| v.clamp(0.0, *m)).collect() };
    let mut cost = |x: &[f64]| split_cost(a, &clamp(x), r);
    // All-row, all-column and halfway splits as simplex starts.
    let starts = [row_max.clone(), vec![0.0; n], row_max.iter().map(|m| m / 2.0).collect()];
    let mut best = (row_max.clone(), cost(&row_max));
    for s in &starts {
        let evals = (200 * n).max(400).min(20 * budget.iterations.max(50));
        let (x, v) = nelder_mead_polish(&mut cost, s, 0.25, 6, evals);
        if v < best.1 {
            best = (clamp(&x), v);
        }
    }
    // Coordinate refinement: the cost is convex and piecewise smooth in each bound.
    let mut rb = best.0;
    let mut val = best.1;
    for _ in 0..60 {
        let mut moved = false;
        for i in 0..n {
            let mut h = 0.25 * row_max[i];
            while h > 1e-15 * (1.0 + row_max[i]) {
                let mut improved = false;
                for d in [h, -h] {
                    let mut t = rb.clone();
                    t[i] = (t[i] + d).clamp(0.0, row_max[i]);
                    let v = split_cost(a, &t, r);
                    if v < val {
                        rb = t;
                        val = v;
                        improved = true;
                        moved = true;
                    }
                }
                if !improved {
                    h /= 2.0;
                }
            }
        }
        if !moved {
            break;
        }
    }
    (rb, val)
}

fn aligned_split(phi: &ComplexMatrix, rb: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
    let n = phi.nrows();
    let phi1 = ComplexMatrix::from_fn(n, n, |i, j| {
        let z = phi[(i, j)];
        let m = z.norm();
        if m <= rb[i] { z } else { z * cplx(rb[i] / m, 0.0) }
    });
    let phi2 = phi - &phi1;
    (phi1, phi2)
}

/// Splits φ = φ1 + φ2 with φ1 row-wise and ᵗφ2 row-wise in ℓ_r(ℓ_∞),
/// minimizing the sum of the two norms. φ2 is defined as φ − φ1.
pub fn ell_r_linf_decompose(mask: &MultiplierMask, r: f64, budget: Budget) -> Result<Decomposition> {
    if !(r >= 1.0) {
        return Err(invalid(format!("r = {r} must be at least 1")));
    }
    let n = mask.n();
    let phi = &mask.phi;
    let top = phi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if top == 0.0 {
        return Ok(Decomposition { phi1: phi.clone(), phi2: ComplexMatrix::zeros(n, n), objective: 0.0 });
    }
    // Solve on the normalized moduli, in both orientations.
    let a = mask.moduli();
    let norm: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|v| v / top).collect()).collect();
    let tr: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| norm[i][j]).collect()).collect();
    let (rb, _) = solve_row_bounds(&norm, r, budget);
    let (cb, _) = solve_row_bounds(&tr, r, budget);
    let by_rows = aligned_split(phi, &rb.iter().map(|b| b * top).collect::<Vec<_>>());
    let (p1, p2) = aligned_split(&phi.transpose(), &cb.iter().map(|b| b * top).collect::<Vec<_>>());
    let by_cols = (p2.transpose(), p1.transpose());
    // Compared on the recomputed objective so that φ and ᵗφ pick mirrored splits.
    let cost = |(a, b): &(ComplexMatrix, ComplexMatrix)| lr_linf_norm(a, r) + lr_linf_norm(&b.transpose(), r);
    let (c_rows, c_cols) = (cost(&by_rows), cost(&by_cols));
    let ((phi1, phi2), objective) = if c_rows <= c_cols { (by_rows, c_rows) } else { (by_cols, c_cols) };
    Ok(Decomposition { phi1, phi2, objective })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneDomination {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// ‖α‖_{2r} ‖β‖_{2r}.
    pub objective: f64,
}

/// log‖α‖_s + log‖(max_i c_ij/α_i)_j‖_s in log coordinates, over the active
/// rows/columns.
fn domination_cost(logc: &[Vec<Option<f64>>], la: &[f64], s: f64) -> f64 {
    let lse = |v: &[f64]| -> f64 {
        let top = v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
        if s.is_infinite() || top == f64::NEG_INFINITY {
            return top;
        }
        top + v.iter().map(|x| (s * (x - top)).exp()).sum::<f64>().ln() / s
    };
    let ncols = logc.first().map_or(0, |r| r.len());
    let lb: Vec<f64> = (0..ncols)
        .map(|j| logc.iter().zip(la).filter_map(|(row, a)| row[j].map(|c| c - a)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    lse(la) + lse(&lb)
}

/// Minimizes ‖α‖_{2r}‖β‖_{2r} over α_i β_j ≥ |φ_ij| (zero entries impose
/// nothing), returning balanced witnesses ‖α‖_{2r} = ‖β‖_{2r}.
pub fn rank_one_dominate(mask: &MultiplierMask, r: f64, budget: Budget) -> Result<RankOneDomination> {
    if !(r >= 1.0) {
        return Err(invalid(format!("r = {r} must be at least 1")));
    }
    let n = mask.n();
    let a = mask.moduli();
    let rows: Vec<usize> = (0..n).filter(|&i| a[i].iter().any(|v| *v > 0.0)).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| (0..n).any(|i| a[i][j] > 0.0)).collect();
    if rows.is_empty() {
        return Ok(RankOneDomination { alpha: vec![0.0; n], beta: vec![0.0; n], objective: 0.0 });
    }
    let s = 2.0 * r;
    let logc: Vec<Vec<Option<f64>>> =
        rows.iter().map(|&i| cols.iter().map(|&j| (a[i][j] > 0.0).then(|| a[i][j].ln())).collect()).collect();
    let best_b = |la: &[f64]| -> Vec<f64> {
        (0..cols.len())
            .map(|j| logc.iter().zip(la).filter_map(|(row, a)| row[j].map(|c| c - a)).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    };
    let best_a = |lb: &[f64]| -> Vec<f64> {
        logc.iter().map(|row| row.iter().zip(lb).filter_map(|(c, b)| c.map(|c| c - b)).fold(f64::NEG_INFINITY, f64::max)).collect()
    };
    // Start from β = column maxima: exact when |φ| has rank one.
    let lb0: Vec<f64> = (0..cols.len()).map(|j| logc.iter().filter_map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut la = best_a(&lb0);
    let mut val = domination_cost(&logc, &la, s);
    let mut cost = |x: &[f64]| domination_cost(&logc, x, s);
    for _ in 0..budget.restarts.max(1) {
        let evals = (300 * la.len()).max(600).min(20 * budget.iterations.max(50));
        let (x, v) = nelder_mead_polish(&mut cost, &la, 0.5, 4, evals);
        // Alternating best responses never increase the cost.
        let x2 = best_a(&best_b(&x));
        let v2 = domination_cost(&logc, &x2, s);
        let (x, v) = if v2 <= v { (x2, v2) } else { (x, v) };
        if v < val - 1e-15 {
            la = x;
            val = v;
        } else {
            break;
        }
    }
    let lb = best_b(&la);
    // Balance the two norms.
    let norm = |v: &[f64]| lp_of(&v.iter().map(|x| x.exp()).collect::<Vec<_>>(), s);
    let shift = 0.5 * (norm(&lb).ln() - norm(&la).ln());
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    for (k, &i) in rows.iter().enumerate() {
        alpha[i] = (la[k] + shift).exp();
    }
    for (k, &j) in cols.iter().enumerate() {
        beta[j] = (lb[k] - shift).exp();
    }
    let objective = lp_of(&alpha, s) * lp_of(&beta, s);
    Ok(RankOneDomination { alpha, beta, objective })
}

/// Lower estimate of ‖I_{S_p^n} ⊗ M_φ: S_p^n[S_p] → S_p^n[S_q]‖ for n ≤ 3.
/// Uses ‖y‖_{S_p^n[S_q]} ≥ ‖(a⊗1) y (b⊗1)‖_q / (‖a‖_{2s}‖b‖_{2s}),
/// 1/q = 1/p + 1/s, on the amplified symbol J_n ⊗ φ.
pub fn schur_cb_lower(mask: &MultiplierMask, p: f64, q: f64, levels: usize, budget: Budget) -> Result<Vec<f64>> {
    check_pq(p, q)?;
    if levels > 3 {
        return Err(invalid("amplification is limited to levels ≤ 3"));
    }
    let m = mask.n();
    let inv_s = 1.0 / q - if p.is_infinite() { 0.0 } else { 1.0 / p };
    let two_s = if inv_s <= 0.0 { f64::INFINITY } else { 2.0 / inv_s };
    let mut out = Vec::new();
    for n in 1..=levels.max(1) {
        let big = kron(&ComplexMatrix::from_element(n, n, cplx(1.0, 0.0)), &mask.phi);
        let support = mask.support().map(|s| {
            let mut t = BTreeSet::new();
            for a in 0..n {
                for b in 0..n {
                    for &(i, j) in s {
                        t.insert((a * m + i, b * m + j));
                    }
                }
            }
            t
        });
        let amp = MultiplierMask::with_support(big, support)?;
        let nm = n * m;
        let est = schur_norm(&amp, p, q, budget)?;
        // a = b = I_n in the bracket: ‖I_n‖_{2s}² = n^{1/s}.
        let mut best = est.value * (n as f64).powf(-inv_s);
        if n > 1 && inv_s > 0.0 {
            let unpack = |v: &[f64], rows: usize, off: usize| {
                ComplexMatrix::from_fn(rows, rows, |i, j| cplx(v[off + 2 * (i * rows + j)], v[off + 2 * (i * rows + j) + 1]))
            };
            let lift = |a: &ComplexMatrix| kron(a, &crate::linalg::identity(m));
            let f = |v: &[f64]| -> f64 {
                let x = restrict(&amp, &unpack(v, nm, 0));
                let a = unpack(v, n, 2 * nm * nm);
                let b = unpack(v, n, 2 * nm * nm + 2 * n * n);
                let y = lift(&a) * schur_apply(&amp, &x).unwrap_or_else(|_| x.clone()) * lift(&b);
                let den = schatten_norm(&x, p).unwrap_or(0.0)
                    * schatten_norm(&a, two_s).unwrap_or(0.0)
                    * schatten_norm(&b, two_s).unwrap_or(0.0);
                if den > 0.0 { schatten_norm(&y, q).unwrap_or(0.0) / den } else { f64::NEG_INFINITY }
            };
            let mut rng = budget.rng(500 + n as u64);
            let mut x0: Vec<f64> = Vec::new();
            x0.extend(est.maximizer.iter().flat_map(|z| [z.re, z.im]));
            for _ in 0..2 {
                let id = crate::linalg::identity(n);
                x0.extend(id.iter().flat_map(|z| [z.re, z.im]));
            }
            let mut g = f;
            let (_, v) = es_maximize(&mut g, &x0, 0.1, budget.iterations, &mut rng);
            best = best.max(v);
        }
        out.push(best);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    /// Lower estimate of the norm on S_p^Λ.
    pub restricted_lower: f64,
    /// Decomposition objective of the best full-grid extension.
    pub extension_objective: f64,
    pub extension: Decomposition,
    /// extension_objective / restricted_lower.
    pub ratio: f64,
}

/// Extends a multiplier on S_p^Λ to the full grid. The decomposition
/// objective only grows with |φ|, so extending by zero is optimal among all
/// extensions; the report compares it with the restricted lower estimate.
pub fn extension_experiment(mask: &MultiplierMask, p: f64, q: f64, budget: Budget) -> Result<ExtensionReport> {
    check_pq(p, q)?;
    let restricted_lower = schur_norm(mask, p, q, budget)?.value;
    let r = multiplier_exponent(p, q);
    let extension = ell_r_linf_decompose(&mask.zero_extension(), r, budget)?;
    let ratio = if restricted_lower > 0.0 { extension.objective / restricted_lower } else { 0.0 };
    Ok(ExtensionReport { restricted_lower, extension_objective: extension.objective, extension, ratio })
}

/// r = pq/(p − q) (∞ when p = q).
pub fn multiplier_exponent(p: f64, q: f64) -> f64 {
    if p.is_infinite() {
        q
    } else if p == q {
        f64::INFINITY
    } else {
        p * q / (p - q)
    }
}

/// |Σ φ_ij x_ij y_ij|.
pub fn bilinear_pairing(phi: &ComplexMatrix, x: &ComplexMatrix, y: &ComplexMatrix) -> C64 {
    phi.component_mul(x).component_mul(y).sum()
}
