//! Searches over positive unit functionals on L_{p/2}: densities F ≥ 0 with
//! ‖F‖_r ≤ 1, r the conjugate index of p/2. Every certificate in this crate
//! is a minimum of some constant over finitely many such densities.

use crate::linalg::{cplx, eigh, identity, op_norm, psd_schatten, random_psd, zeros, ComplexMatrix, C64};
use crate::optim::nelder_mead_polish;
use crate::rng::Budget;
use crate::vv::MatrixSubspace;

/// P_{ii'} = tr(F e_i e_{i'}^*): f(aa*) = γ* P γ with γ the conjugated coordinates of a.
pub fn row_gram(space: &MatrixSubspace, f: &ComplexMatrix) -> ComplexMatrix {
    let b = space.basis();
    let k = b.len();
    let fb: Vec<ComplexMatrix> = b.iter().map(|e| f * e).collect();
    ComplexMatrix::from_fn(k, k, |i, j| trace_prod(&fb[i], &b[j].adjoint()))
}

/// P'_{ii'} = tr(F e_i^* e_{i'}): f(a*a) = α* P' α with α the coordinates of a.
pub fn col_gram(space: &MatrixSubspace, f: &ComplexMatrix) -> ComplexMatrix {
    let b = space.basis();
    let k = b.len();
    let fb: Vec<ComplexMatrix> = b.iter().map(|e| f * e.adjoint()).collect();
    ComplexMatrix::from_fn(k, k, |i, j| trace_prod(&fb[i], &b[j]))
}

fn trace_prod(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Pseudo-inverse square root of a positive semidefinite matrix together with
/// the orthogonal projection onto its kernel.
fn whitening(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let (vals, v) = eigh(a);
    let n = vals.len();
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cut = 1e-13 * top.max(f64::MIN_POSITIVE);
    let mut w = zeros(n, n);
    let mut ker = zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        let col = v.column(k).into_owned();
        let outer = &col * col.adjoint();
        if l > cut {
            w += outer / cplx(l.sqrt(), 0.0);
        } else {
            ker += outer;
        }
    }
    (w, ker)
}

/// sup |γ*Uβ| / (γ*Aγ · β*Bβ)^{1/2} for positive semidefinite A, B;
/// +∞ when U reaches into a kernel.
pub fn form_constant(a: &ComplexMatrix, u: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = op_norm(u);
    if scale == 0.0 {
        return 0.0;
    }
    let (wa, ka) = whitening(a);
    let (wb, kb) = whitening(b);
    let leak = op_norm(&(&ka * u)).max(op_norm(&(u * &kb)));
    if leak > 1e-9 * scale {
        return f64::INFINITY;
    }
    op_norm(&(wa * u * wb))
}

/// A density normalized onto the unit sphere of S_r (zero stays zero).
pub fn normalize_state(f: &ComplexMatrix, r: f64) -> ComplexMatrix {
    let h = (f + f.adjoint()).scale(0.5);
    let n = psd_schatten(&h, r);
    if n > 0.0 { h.unscale(n) } else { h }
}

pub fn uniform_state(m: usize, r: f64) -> ComplexMatrix {
    normalize_state(&identity(m), r)
}

/// Cholesky-type coordinates: F = L L^*, L lower triangular with real diagonal.
fn params_per_state(m: usize) -> usize {
    m * m
}

fn state_from_params(x: &[f64], m: usize, r: f64) -> ComplexMatrix {
    let mut l = zeros(m, m);
    let mut o = 0;
    for i in 0..m {
        l[(i, i)] = cplx(x[o], 0.0);
        o += 1;
        for j in 0..i {
            l[(i, j)] = cplx(x[o], x[o + 1]);
            o += 2;
        }
    }
    normalize_state(&(&l * l.adjoint()), r)
}

fn params_from_state(f: &ComplexMatrix) -> Vec<f64> {
    let m = f.nrows();
    let reg = f + identity(m).scale(1e-12 * (1.0 + f.norm()));
    let l = match reg.clone().cholesky() {
        Some(c) => c.l(),
        None => crate::linalg::psd_sqrt(&reg),
    };
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        // Rotate each row so the diagonal entry is real and nonnegative.
        let d = l[(i, i)];
        let phase = if d.norm() > 0.0 { d.conj() / d.norm() } else { cplx(1.0, 0.0) };
        out.push((d * phase).re);
        for j in 0..i {
            let z = l[(i, j)] * phase;
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

/// An objective over a tuple of densities, to be minimized.
pub trait StateObjective {
    fn num_states(&self) -> usize;
    /// Size of each density (all live in the same matrix algebra).
    fn dims(&self) -> Vec<usize>;
    fn value(&self, states: &[ComplexMatrix]) -> f64;
    /// Descent directions: positive matrices whose addition lowers the value
    /// (e.g. the worst-case aa* for a certificate). Optional.
    fn descent(&self, _states: &[ComplexMatrix]) -> Option<Vec<ComplexMatrix>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub states: Vec<ComplexMatrix>,
    pub value: f64,
}

/// Projected descent followed by Nelder–Mead polishing in Cholesky
/// coordinates, from the uniform start and `budget.restarts − 1` random ones.
pub fn minimize_states<O: StateObjective>(obj: &O, r: f64, budget: Budget, descent_iters: usize) -> StateSolution {
    let dims = obj.dims();
    let mut best = StateSolution { states: dims.iter().map(|&m| uniform_state(m, r)).collect(), value: f64::INFINITY };
    best.value = obj.value(&best.states);
    for restart in 0..budget.restarts.max(1) {
        let mut rng = budget.rng(restart as u64);
        let mut states: Vec<ComplexMatrix> = if restart == 0 {
            dims.iter().map(|&m| uniform_state(m, r)).collect()
        } else {
            dims.iter().map(|&m| normalize_state(&random_psd(&mut rng, m, 0.1), r)).collect()
        };
        let mut val = obj.value(&states);
        let mut local = StateSolution { states: states.clone(), value: val };

        // Projected descent: move towards the worst-case directions, renormalize.
        for t in 0..descent_iters {
            let Some(dirs) = obj.descent(&states) else { break };
            let step = 0.5 / ((t + 1) as f64).sqrt();
            states = states
                .iter()
                .zip(&dirs)
                .map(|(s, d)| {
                    let dn = d.norm();
                    if dn == 0.0 {
                        return s.clone();
                    }
                    normalize_state(&(s + d.scale(step * s.norm() / dn)), r)
                })
                .collect();
            val = obj.value(&states);
            if val < local.value {
                local = StateSolution { states: states.clone(), value: val };
            }
        }

        // Polish.
        let mut x0 = Vec::new();
        for s in &local.states {
            x0.extend(params_from_state(s));
        }
        let unpack = |x: &[f64]| -> Vec<ComplexMatrix> {
            let mut o = 0;
            dims.iter()
                .map(|&m| {
                    let k = params_per_state(m);
                    let s = state_from_params(&x[o..o + k], m, r);
                    o += k;
                    s
                })
                .collect()
        };
        let mut f = |x: &[f64]| obj.value(&unpack(x));
        let evals = (400 * x0.len()).clamp(800, 20 * budget.iterations.max(100));
        let (x, v) = nelder_mead_polish(&mut f, &x0, 0.25, 4, evals);
        if v < local.value {
            local = StateSolution { states: unpack(&x), value: v };
        }
        if local.value < best.value {
            best = local;
        }
    }
    best
}
