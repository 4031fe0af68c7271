//! Truncated full Fock space over ℓ_2{e_{±1}, …, e_{±K}}, the generalized
//! circular operators g_k = λ_k^θ (ℓ(e_k) + λ_k^{-1} ℓ*(e_{-k})), and exact
//! vacuum moments of words that also contain powers of the density D.
//!
//! D never exists as a matrix: every D^s is pushed to the right end with
//! D^s g_k D^{-s} = λ_k^{-2s} g_k and D^s g_k* D^{-s} = λ_k^{2s} g_k*, and what
//! is left is read as ρ(w) = ⟨Ω, wΩ⟩.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{op_norm, psd_schatten, zeros, ComplexMatrix, C64};

/// Basis words are indexed degree by degree; within a degree, lexicographically
/// with the first letter most significant. Letter e_k (k > 0) is digit k−1 and
/// e_{−k} is digit K+k−1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    num_modes: usize,
    max_degree: usize,
    #[serde(skip)]
    offsets: Vec<usize>,
}

impl FockSpace {
    pub fn new(num_modes: usize, max_degree: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(invalid("need at least one mode"));
        }
        let base = 2 * num_modes;
        let mut offsets = vec![0usize];
        let mut width = 1usize;
        for _ in 0..=max_degree {
            let last = *offsets.last().unwrap();
            let next = last
                .checked_add(width)
                .ok_or_else(|| invalid("Fock space too large to index"))?;
            offsets.push(next);
            width = width.checked_mul(base).ok_or_else(|| invalid("Fock space too large to index"))?;
        }
        Ok(Self { num_modes, max_degree, offsets })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Σ_{n ≤ N} (2K)^n.
    pub fn dim(&self) -> usize {
        self.offsets[self.max_degree + 1]
    }

    /// Number of basis words of degree ≤ n.
    pub fn dim_up_to(&self, n: usize) -> usize {
        self.offsets[n.min(self.max_degree) + 1]
    }

    fn base(&self) -> usize {
        2 * self.num_modes
    }

    fn digit(&self, mode: i32) -> Result<usize> {
        let k = mode.unsigned_abs() as usize;
        if mode == 0 || k > self.num_modes {
            return Err(invalid(format!("mode {mode} outside ±1..±{}", self.num_modes)));
        }
        Ok(if mode > 0 { k - 1 } else { self.num_modes + k - 1 })
    }

    fn mode_of(&self, digit: usize) -> i32 {
        if digit < self.num_modes { digit as i32 + 1 } else { -((digit - self.num_modes) as i32 + 1) }
    }

    pub fn degree(&self, index: usize) -> usize {
        match self.offsets.binary_search(&index) {
            Ok(d) => d,
            Err(d) => d - 1,
        }
    }

    pub fn index_of(&self, word: &[i32]) -> Result<usize> {
        if word.len() > self.max_degree {
            return Err(Error::TruncationTooShallow { len: word.len(), max_degree: self.max_degree });
        }
        let mut rel = 0usize;
        for &m in word {
            rel = rel * self.base() + self.digit(m)?;
        }
        Ok(self.offsets[word.len()] + rel)
    }

    pub fn word_of(&self, index: usize) -> Vec<i32> {
        let n = self.degree(index);
        let mut rel = index - self.offsets[n];
        let mut out = vec![0; n];
        for slot in out.iter_mut().rev() {
            *slot = self.mode_of(rel % self.base());
            rel /= self.base();
        }
        out
    }

    /// ℓ(e_mode) on a basis word; None when truncated away.
    fn create(&self, digit: usize, index: usize) -> Option<usize> {
        let n = self.degree(index);
        if n >= self.max_degree {
            return None;
        }
        let rel = index - self.offsets[n];
        Some(self.offsets[n + 1] + digit * self.base().pow(n as u32) + rel)
    }

    /// ℓ*(e_mode) on a basis word.
    fn annihilate(&self, digit: usize, index: usize) -> Option<usize> {
        let n = self.degree(index);
        if n == 0 {
            return None;
        }
        let rel = index - self.offsets[n];
        let span = self.base().pow(n as u32 - 1);
        (rel / span == digit).then(|| self.offsets[n - 1] + rel % span)
    }

    /// Matrix of ℓ(e_mode); words of top degree map to 0.
    pub fn creation(&self, mode: i32) -> Result<SparseOp> {
        let d = self.digit(mode)?;
        Ok(SparseOp::from_action(self.dim(), |j| self.create(d, j).map(|i| (i, C64::new(1.0, 0.0))).into_iter().collect()))
    }

    /// Matrix of ℓ*(e_mode).
    pub fn annihilation(&self, mode: i32) -> Result<SparseOp> {
        let d = self.digit(mode)?;
        Ok(SparseOp::from_action(self.dim(), |j| {
            self.annihilate(d, j).map(|i| (i, C64::new(1.0, 0.0))).into_iter().collect()
        }))
    }

    pub fn vacuum(&self) -> FockVector {
        FockVector::basis(0)
    }
}

/// Sparse vector over the word basis (ordered, so sums are reproducible).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FockVector {
    pub coeffs: BTreeMap<usize, C64>,
}

impl FockVector {
    pub fn basis(index: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(index, C64::new(1.0, 0.0));
        Self { coeffs }
    }

    pub fn get(&self, index: usize) -> C64 {
        self.coeffs.get(&index).copied().unwrap_or_default()
    }

    fn add(&mut self, index: usize, c: C64) {
        *self.coeffs.entry(index).or_default() += c;
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        self.coeffs.iter().map(|(i, c)| c.conj() * other.get(*i)).sum()
    }

    pub fn scaled(mut self, c: C64) -> Self {
        for v in self.coeffs.values_mut() {
            *v *= c;
        }
        self
    }

    pub fn plus(mut self, other: &FockVector) -> Self {
        for (i, c) in &other.coeffs {
            self.add(*i, *c);
        }
        self
    }
}

/// Column-sparse square matrix on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub fn from_action(dim: usize, mut col: impl FnMut(usize) -> Vec<(usize, C64)>) -> Self {
        Self { dim, cols: (0..dim).map(&mut col).collect() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_action(dim, |j| vec![(j, C64::new(1.0, 0.0))])
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, cols: vec![Vec::new(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        let mut out = FockVector::default();
        for (j, c) in &v.coeffs {
            for (i, a) in &self.cols[*j] {
                out.add(*i, a * c);
            }
        }
        out
    }

    /// self · other.
    pub fn mul(&self, other: &SparseOp) -> SparseOp {
        let mut scratch = vec![C64::new(0.0, 0.0); self.dim];
        let mut touched = Vec::new();
        let cols = other
            .cols
            .iter()
            .map(|col| {
                for (k, b) in col {
                    for (i, a) in &self.cols[*k] {
                        if scratch[*i] == C64::new(0.0, 0.0) {
                            touched.push(*i);
                        }
                        scratch[*i] += a * b;
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                let out = touched
                    .iter()
                    .filter_map(|&i| {
                        let v = std::mem::take(&mut scratch[i]);
                        (v != C64::new(0.0, 0.0)).then_some((i, v))
                    })
                    .collect();
                touched.clear();
                out
            })
            .collect();
        SparseOp { dim: self.dim, cols }
    }

    /// self + c·other.
    pub fn add_scaled(&self, other: &SparseOp, c: C64) -> SparseOp {
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| {
                let mut m: BTreeMap<usize, C64> = a.iter().copied().collect();
                for (i, v) in b {
                    *m.entry(*i).or_default() += c * v;
                }
                m.into_iter().filter(|(_, v)| *v != C64::new(0.0, 0.0)).collect()
            })
            .collect();
        SparseOp { dim: self.dim, cols }
    }

    pub fn adjoint(&self) -> SparseOp {
        let mut cols = vec![Vec::new(); self.dim];
        for (j, col) in self.cols.iter().enumerate() {
            for (i, a) in col {
                cols[*i].push((j, a.conj()));
            }
        }
        SparseOp { dim: self.dim, cols }
    }

    /// Dense compression to the first `keep` basis words.
    pub fn compress(&self, keep: usize) -> ComplexMatrix {
        let mut m = zeros(keep, keep);
        for (j, col) in self.cols.iter().enumerate().take(keep) {
            for (i, a) in col {
                if *i < keep {
                    m[(*i, j)] += a;
                }
            }
        }
        m
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        self.compress(self.dim)
    }
}

/// One letter of a word: g_k, g_k*, or a density power D^s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Letter {
    G { mode: usize, adjoint: bool },
    D(f64),
}

/// A word in the g_k, g_k* and powers of D, e.g. `g1* D^0.5 g1 D^0.5`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModularWord {
    pub letters: Vec<Letter>,
}

fn parse_exponent(t: &str) -> Option<f64> {
    let t = t.trim().trim_start_matches('(').trim_end_matches(')');
    if let Some((a, b)) = t.split_once('/') {
        let (a, b) = (a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?);
        (b != 0.0).then(|| a / b)
    } else {
        t.parse().ok()
    }
}

impl FromStr for ModularWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            let letter = if let Some(rest) = tok.strip_prefix('D') {
                if rest.is_empty() {
                    Letter::D(1.0)
                } else {
                    let e = rest
                        .strip_prefix('^')
                        .and_then(parse_exponent)
                        .ok_or_else(|| Error::WordSyntax(format!("bad density power `{tok}`")))?;
                    Letter::D(e)
                }
            } else if let Some(rest) = tok.strip_prefix('g') {
                let (num, adjoint) = match rest.strip_suffix('*') {
                    Some(n) => (n, true),
                    None => (rest, false),
                };
                let mode: usize = num.parse().map_err(|_| Error::WordSyntax(format!("bad letter `{tok}`")))?;
                if mode == 0 {
                    return Err(Error::WordSyntax(format!("modes start at 1 (`{tok}`)")));
                }
                Letter::G { mode, adjoint }
            } else {
                return Err(Error::WordSyntax(format!("unknown letter `{tok}`")));
            };
            letters.push(letter);
        }
        Ok(Self { letters })
    }
}

impl fmt::Display for ModularWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|l| match l {
                Letter::G { mode, adjoint } => format!("g{mode}{}", if *adjoint { "*" } else { "" }),
                Letter::D(s) => format!("D^{s}"),
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl ModularWord {
    pub fn g_len(&self) -> usize {
        self.letters.iter().filter(|l| matches!(l, Letter::G { .. })).count()
    }

    pub fn total_density_power(&self) -> f64 {
        self.letters.iter().map(|l| if let Letter::D(s) = l { *s } else { 0.0 }).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularSystem {
    pub lambdas: Vec<f64>,
    pub theta: f64,
    pub space: FockSpace,
}

#[derive(Serialize, Deserialize)]
struct SystemRepr {
    lambdas: Vec<f64>,
    theta: f64,
    #[serde(default)]
    num_modes: Option<usize>,
    #[serde(default)]
    max_degree: Option<usize>,
}

/// Wire format {"lambdas", "theta", "num_modes", "max_degree"}.
pub mod system_json {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &CircularSystem, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SystemRepr {
            lambdas: s.lambdas.clone(),
            theta: s.theta,
            num_modes: Some(s.space.num_modes()),
            max_degree: Some(s.space.max_degree()),
        }
        .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CircularSystem, D::Error> {
        let r = SystemRepr::deserialize(d)?;
        let k = r.num_modes.unwrap_or(r.lambdas.len());
        if k != r.lambdas.len() {
            return Err(D::Error::custom(format!("num_modes = {k} but {} lambdas given", r.lambdas.len())));
        }
        CircularSystem::new(r.lambdas, r.theta, r.max_degree.unwrap_or(4)).map_err(D::Error::custom)
    }
}

impl CircularSystem {
    pub fn new(lambdas: Vec<f64>, theta: f64, max_degree: usize) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(invalid("need at least one λ"));
        }
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(invalid(format!("λ = {l} must be positive")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(invalid(format!("θ = {theta} must lie in [0, 1]")));
        }
        let space = FockSpace::new(lambdas.len(), max_degree)?;
        Ok(Self { lambdas, theta, space })
    }

    pub fn with_degree(&self, max_degree: usize) -> Result<Self> {
        Self::new(self.lambdas.clone(), self.theta, max_degree)
    }

    pub fn num_modes(&self) -> usize {
        self.lambdas.len()
    }

    fn lambda(&self, mode: usize) -> Result<f64> {
        self.lambdas
            .get(mode.wrapping_sub(1))
            .copied()
            .ok_or_else(|| invalid(format!("mode {mode} outside 1..{}", self.lambdas.len())))
    }

    /// g_k (or g_k*) applied to a vector.
    pub fn apply_g(&self, mode: usize, adjoint: bool, v: &FockVector) -> Result<FockVector> {
        let l = self.lambda(mode)?;
        let sp = &self.space;
        let plus = sp.digit(mode as i32)?;
        let minus = sp.digit(-(mode as i32))?;
        let w = l.powf(self.theta);
        let mut out = FockVector::default();
        for (&j, &c) in &v.coeffs {
            // g_k  = λ^θ (ℓ(e_k)  + λ^{-1} ℓ*(e_{-k}))
            // g_k* = λ^θ (ℓ*(e_k) + λ^{-1} ℓ(e_{-k}))
            let (first, second) = if adjoint {
                (sp.annihilate(plus, j), sp.create(minus, j))
            } else {
                (sp.create(plus, j), sp.annihilate(minus, j))
            };
            if let Some(i) = first {
                out.add(i, c * w);
            }
            if let Some(i) = second {
                out.add(i, c * (w / l));
            }
        }
        Ok(out)
    }

    /// Matrix of s_k = ℓ(e_k) + λ_k^{-1} ℓ*(e_{-k}).
    pub fn s_matrix(&self, mode: usize) -> Result<SparseOp> {
        let l = self.lambda(mode)?;
        let c = self.space.creation(mode as i32)?;
        let a = self.space.annihilation(-(mode as i32))?;
        Ok(c.add_scaled(&a, C64::new(1.0 / l, 0.0)))
    }

    /// Matrix of g_k = λ_k^θ s_k.
    pub fn g_matrix(&self, mode: usize) -> Result<SparseOp> {
        let l = self.lambda(mode)?;
        let s = self.s_matrix(mode)?;
        Ok(SparseOp::zero(s.dim()).add_scaled(&s, C64::new(l.powf(self.theta), 0.0)))
    }

    /// Eigenvalue of the modular operator on a basis word: the product of
    /// λ_k^{-2} over letters e_k and λ_k^{2} over letters e_{-k}.
    pub fn modular_weight(&self, index: usize, s: f64) -> f64 {
        let log: f64 = self
            .space
            .word_of(index)
            .iter()
            .map(|&m| {
                let l = self.lambdas[m.unsigned_abs() as usize - 1].ln();
                if m > 0 { -2.0 * l } else { 2.0 * l }
            })
            .sum();
        (s * log).exp()
    }
}

/// Drops components that cannot come back to the vacuum within `remaining`
/// further letters (each letter changes the degree by one).
fn prune(v: FockVector, sp: &FockSpace, remaining: usize) -> FockVector {
    let keep = sp.dim_up_to(remaining);
    FockVector { coeffs: v.coeffs.into_iter().filter(|(i, c)| *i < keep && *c != C64::new(0.0, 0.0)).collect() }
}

/// Moves every density power to the right end, returning the accumulated
/// scalar and the plain word as (mode, adjoint) pairs.
pub fn rewrite(word: &ModularWord, sys: &CircularSystem) -> Result<(f64, Vec<(usize, bool)>)> {
    let mut log_scalar = 0.0;
    let mut plain = Vec::new();
    // Walk right to left: a D^s passes every g-letter to its right.
    let mut passed_log = 0.0; // Σ over letters to the right of ∓2 ln λ
    for l in word.letters.iter().rev() {
        match *l {
            Letter::G { mode, adjoint } => {
                let lam = sys.lambda(mode)?;
                passed_log += if adjoint { 2.0 * lam.ln() } else { -2.0 * lam.ln() };
                plain.push((mode, adjoint));
            }
            Letter::D(s) => {
                log_scalar += s * passed_log;
            }
        }
    }
    plain.reverse();
    Ok((log_scalar.exp(), plain))
}

/// ⟨Ω, w Ω⟩ for a plain word.
fn plain_vacuum(plain: &[(usize, bool)], sys: &CircularSystem) -> Result<C64> {
    let sp = &sys.space;
    let mut v = sp.vacuum();
    for (done, &(mode, adjoint)) in plain.iter().rev().enumerate() {
        v = sys.apply_g(mode, adjoint, &v)?;
        v = prune(v, sp, plain.len() - done - 1);
        if v.is_empty() {
            return Ok(C64::new(0.0, 0.0));
        }
    }
    Ok(v.get(0))
}

/// Vacuum moment of a word: the density powers are rewritten to the right and
/// the word is read as tr(w·D^{1−S}) with S its total density power, i.e. as
/// ρ(w) when it contains no D and as tr(w) when the powers add up to 1.
pub fn vacuum_moment(word: &ModularWord, sys: &CircularSystem) -> Result<C64> {
    let total = word.total_density_power();
    if !(-1e-12..=1.0 + 1e-12).contains(&total) {
        return Err(invalid(format!("total density power {total} must lie in [0, 1]")));
    }
    let len = word.g_len();
    if len > sys.space.max_degree() {
        return Err(Error::TruncationTooShallow { len, max_degree: sys.space.max_degree() });
    }
    let (scalar, plain) = rewrite(word, sys)?;
    Ok(plain_vacuum(&plain, sys)? * scalar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KhintchineSides {
    /// max of the two weighted square functions.
    pub lhs: f64,
    /// ‖Σ x_k ⊗ g_{k,p}‖_p from the word expansion.
    pub mid: f64,
    /// The same bracket as `lhs` (the upper estimate carries a constant B_p).
    pub rhs: f64,
    pub column_term: f64,
    pub row_term: f64,
    /// ‖Σ x_k ⊗ g_{k,p}‖_p via modular-operator powers on C^n ⊗ Fock.
    pub mid_operator_path: f64,
}

fn check_khintchine(xs: &[ComplexMatrix], p: usize, sys: &CircularSystem) -> Result<usize> {
    if !matches!(p, 2 | 4 | 6 | 8) {
        return Err(invalid(format!("exact moments need p ∈ {{2, 4, 6, 8}}, got {p}")));
    }
    if sys.space.max_degree() < p {
        return Err(Error::TruncationTooShallow { len: p, max_degree: sys.space.max_degree() });
    }
    if xs.is_empty() || xs.len() > sys.num_modes() {
        return Err(mismatch(format!("{} coefficients for {} modes", xs.len(), sys.num_modes())));
    }
    let n = xs[0].nrows();
    if xs.iter().any(|x| x.shape() != (n, n)) {
        return Err(mismatch("coefficients must be square of a common size"));
    }
    Ok(n)
}

/// The three quantities of the Khintchine inequality for the system at even p.
pub fn khintchine_sides(xs: &[ComplexMatrix], p: usize, sys: &CircularSystem) -> Result<KhintchineSides> {
    let n = check_khintchine(xs, p, sys)?;
    let pf = p as f64;
    let th = sys.theta;
    let mut col = zeros(n, n);
    let mut row = zeros(n, n);
    for (k, x) in xs.iter().enumerate() {
        let l = sys.lambdas[k];
        col += x.adjoint() * x * C64::new(l.powf(2.0 * th * (1.0 - 2.0 / pf)), 0.0);
        row += x * x.adjoint() * C64::new(l.powf(-2.0 * (1.0 - th) * (1.0 - 2.0 / pf)), 0.0);
    }
    let column_term = psd_schatten(&col, pf / 2.0).sqrt();
    let row_term = psd_schatten(&row, pf / 2.0).sqrt();
    let lhs = column_term.max(row_term);
    let mid = mid_by_words(xs, p, sys)?;
    let mid_operator_path = mid_by_operators(xs, p, sys)?;
    Ok(KhintchineSides { lhs, mid, rhs: lhs, column_term, row_term, mid_operator_path })
}

fn pth_root(total: C64, p: usize) -> f64 {
    total.re.max(0.0).powf(1.0 / p as f64)
}

/// Σ over index words (j_1,k_1,…,j_m,k_m) of
/// Tr(x_{j1}* x_{k1} ⋯ x_{jm}* x_{km}) · Π (λ_j λ_k)^{-2θ/p} ·
/// tr(D^{1/p} g_{j1}* g_{k1} D^{2/p} ⋯ g_{jm}* g_{km} D^{1/p}).
fn mid_by_words(xs: &[ComplexMatrix], p: usize, sys: &CircularSystem) -> Result<f64> {
    let m = p / 2;
    let kk = xs.len();
    let pf = p as f64;
    let products: Vec<Vec<ComplexMatrix>> =
        (0..kk).map(|j| (0..kk).map(|k| xs[j].adjoint() * &xs[k]).collect()).collect();
    let weight: Vec<f64> = sys.lambdas.iter().map(|l| l.powf(-2.0 * sys.theta / pf)).collect();
    let mut total = C64::new(0.0, 0.0);
    let mut idx = vec![0usize; 2 * m];
    loop {
        // Each g_k must meet a g_k*: the counts have to balance per mode.
        let mut balance = vec![0i32; kk];
        for t in 0..m {
            balance[idx[2 * t]] += 1;
            balance[idx[2 * t + 1]] -= 1;
        }
        if balance.iter().all(|b| *b == 0) {
            let mut letters = vec![Letter::D(1.0 / pf)];
            let mut scalar = 1.0;
            let mut mat = products[idx[0]][idx[1]].clone();
            for t in 0..m {
                let (j, k) = (idx[2 * t], idx[2 * t + 1]);
                if t > 0 {
                    mat = mat * &products[j][k];
                    letters.push(Letter::D(2.0 / pf));
                }
                letters.push(Letter::G { mode: j + 1, adjoint: true });
                letters.push(Letter::G { mode: k + 1, adjoint: false });
                scalar *= weight[j] * weight[k];
            }
            letters.push(Letter::D(1.0 / pf));
            let tr: C64 = mat.diagonal().iter().sum();
            if tr != C64::new(0.0, 0.0) {
                let mom = vacuum_moment(&ModularWord { letters }, sys)?;
                total += tr * mom * scalar;
            }
        }
        // Next index word.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(pth_root(total, p));
            }
            idx[pos] += 1;
            if idx[pos] < kk {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Σ_i ⟨e_i⊗Ω, (A Δ̃)^{m-1} A (e_i⊗Ω)⟩ with A = Σ c_jk x_j*x_k ⊗ g_j* g_k and
/// Δ̃ = I ⊗ Δ^{2/p}, Δ the modular operator acting diagonally on words.
fn mid_by_operators(xs: &[ComplexMatrix], p: usize, sys: &CircularSystem) -> Result<f64> {
    let m = p / 2;
    let n = xs[0].nrows();
    let kk = xs.len();
    let pf = p as f64;
    let sp = &sys.space;
    let weight: Vec<f64> = sys.lambdas.iter().map(|l| l.powf(-2.0 * sys.theta / pf)).collect();
    let products: Vec<Vec<ComplexMatrix>> =
        (0..kk).map(|j| (0..kk).map(|k| xs[j].adjoint() * &xs[k]).collect()).collect();

    let apply_a = |v: &[FockVector], remaining: usize| -> Result<Vec<FockVector>> {
        let mut out = vec![FockVector::default(); n];
        for j in 0..kk {
            for k in 0..kk {
                let c = weight[j] * weight[k];
                for (b, vb) in v.iter().enumerate() {
                    if vb.is_empty() {
                        continue;
                    }
                    let w = sys.apply_g(k + 1, false, vb)?;
                    let w = sys.apply_g(j + 1, true, &w)?;
                    let w = prune(w, sp, remaining);
                    for (a, slot) in out.iter_mut().enumerate() {
                        let coef = products[j][k][(a, b)] * c;
                        if coef != C64::new(0.0, 0.0) {
                            *slot = std::mem::take(slot).plus(&w.clone().scaled(coef));
                        }
                    }
                }
            }
        }
        Ok(out)
    };
    let apply_delta = |v: Vec<FockVector>| -> Vec<FockVector> {
        v.into_iter()
            .map(|fv| FockVector {
                coeffs: fv.coeffs.into_iter().map(|(i, c)| (i, c * sys.modular_weight(i, 2.0 / pf))).collect(),
            })
            .collect()
    };

    let mut total = C64::new(0.0, 0.0);
    for i in 0..n {
        let mut v = vec![FockVector::default(); n];
        v[i] = sp.vacuum();
        for step in 0..m {
            if step > 0 {
                v = apply_delta(v);
            }
            v = apply_a(&v, 2 * (m - step - 1))?;
        }
        total += v[i].get(0);
    }
    Ok(pth_root(total, p))
}

/// Ratio ‖P_∞(a)‖/‖a‖ on the truncated space for a = Σ_w c_w W(e_w), where
/// W(ξ) is the Wick word with W(ξ)Ω = ξ and P_∞(a) = Σ_{k≥1} ⟨e_k, aΩ⟩ W(e_k).
/// Operators are built with enough headroom that their compressions to
/// degree ≤ N are exact.
pub fn triangular_projection_check(coeffs: &[(Vec<i32>, C64)], sys: &CircularSystem) -> Result<f64> {
    let n = sys.space.max_degree();
    let depth = coeffs.iter().map(|(w, _)| w.len()).max().unwrap_or(0).max(1);
    let big = FockSpace::new(sys.num_modes(), n + depth)?;
    let kk = sys.num_modes() as i32;
    let kappa = |i: i32| -> f64 {
        let l = sys.lambdas[i.unsigned_abs() as usize - 1];
        if i > 0 { 1.0 / l } else { l }
    };
    let x_op = |i: i32| -> Result<SparseOp> {
        Ok(big.creation(i)?.add_scaled(&big.annihilation(-i)?, C64::new(kappa(i), 0.0)))
    };
    let mut cache: BTreeMap<Vec<i32>, SparseOp> = BTreeMap::new();
    fn wick(
        word: &[i32],
        cache: &mut BTreeMap<Vec<i32>, SparseOp>,
        big: &FockSpace,
        x_op: &dyn Fn(i32) -> Result<SparseOp>,
        kappa: &dyn Fn(i32) -> f64,
    ) -> Result<SparseOp> {
        if let Some(op) = cache.get(word) {
            return Ok(op.clone());
        }
        let op = match word.split_first() {
            None => SparseOp::identity(big.dim()),
            Some((&i, rest)) => {
                // W(e_i ⊗ ξ) = X_i W(ξ) − κ_i W(ℓ*(e_{−i}) ξ)
                let mut op = x_op(i)?.mul(&wick(rest, cache, big, x_op, kappa)?);
                if rest.first() == Some(&-i) {
                    let tail = wick(&rest[1..], cache, big, x_op, kappa)?;
                    op = op.add_scaled(&tail, C64::new(-kappa(i), 0.0));
                }
                op
            }
        };
        cache.insert(word.to_vec(), op.clone());
        Ok(op)
    }
    let mut a = SparseOp::zero(big.dim());
    for (w, c) in coeffs {
        if w.iter().any(|m| *m == 0 || m.abs() > kk) {
            return Err(invalid(format!("word {w:?} uses modes outside ±1..±{kk}")));
        }
        if w.len() > n {
            return Err(Error::TruncationTooShallow { len: w.len(), max_degree: n });
        }
        a = a.add_scaled(&wick(w, &mut cache, &big, &x_op, &kappa)?, *c);
    }
    let a_omega = a.apply(&big.vacuum());
    let mut proj = SparseOp::zero(big.dim());
    for k in 1..=kk {
        let ck = a_omega.get(big.index_of(&[k])?);
        if ck != C64::new(0.0, 0.0) {
            proj = proj.add_scaled(&x_op(k)?, ck);
        }
    }
    let keep = sys.space.dim();
    let na = op_norm(&a.compress(keep));
    if na == 0.0 {
        return Err(Error::Degenerate("a vanishes on the truncated space".into()));
    }
    Ok(op_norm(&proj.compress(keep)) / na)
}
