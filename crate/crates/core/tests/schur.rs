mod common;

use std::collections::BTreeSet;

use common::*;
use nclp::linalg::{conj_exponent, cplx, lp_of, random_gaussian, ComplexMatrix};
use nclp::rng::Budget;
use nclp::schatten::schatten_norm;
use nclp::schur::*;
use rand::Rng;

fn budget() -> Budget {
    Budget::new(3, 150, 0)
}

fn mask(phi: ComplexMatrix) -> MultiplierMask {
    MultiplierMask::new(phi).unwrap()
}

fn haar2(r: &mut impl Rng) -> ComplexMatrix {
    random_gaussian(r, 2, 2).qr().q()
}

/// Brute force over 2×2 inputs: x = U diag(t, (1−t^p)^{1/p}) V* with Haar U, V,
/// then a random-walk climb from the five best samples.
fn sampled_norm(phi: &ComplexMatrix, p: f64, q: f64, samples: usize, r: &mut impl Rng) -> f64 {
    let m = mask(phi.clone());
    let f = |x: &ComplexMatrix| schatten_norm(&schur_apply(&m, x).unwrap(), q).unwrap() / schatten_norm(x, p).unwrap();
    let mut top: Vec<(f64, ComplexMatrix)> = Vec::new();
    for _ in 0..samples {
        let (u, v) = (haar2(r), haar2(r));
        let t: f64 = r.random();
        let d = if p.is_infinite() { [1.0, 1.0] } else { [t, (1.0 - t.powf(p)).powf(1.0 / p)] };
        let x = &u * diag(&d) * v.adjoint();
        let val = f(&x);
        if top.len() < 5 || val > top[4].0 {
            top.push((val, x));
            top.sort_by(|a, b| b.0.total_cmp(&a.0));
            top.truncate(5);
        }
    }
    let mut best = top[0].0;
    for (mut v, mut x) in top {
        let mut h = 0.1;
        for _ in 0..3000 {
            let y = &x + random_gaussian(r, 2, 2).scale(h);
            let w = f(&y);
            if w > v {
                v = w;
                x = y;
            } else {
                h *= 0.995;
            }
        }
        best = best.max(v);
    }
    best
}

/// min over α = (1, 2^t), t on a 2^{-10} grid, of ‖α‖_s ‖β(α)‖_s with the
/// cheapest feasible β_j = max_i |φ_ij|/α_i.
fn domination_grid(phi: &ComplexMatrix, r: f64) -> f64 {
    let s = 2.0 * r;
    let a: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| phi[(i, j)].norm()).collect()).collect();
    let mut g = f64::INFINITY;
    for step in -40960..=40960 {
        let al = [1.0, (step as f64 / 1024.0).exp2()];
        let be: Vec<f64> = (0..2).map(|j| (0..2).map(|i| a[i][j] / al[i]).fold(0.0, f64::max)).collect();
        g = g.min(lp_of(&al, s) * lp_of(&be, s));
    }
    g
}

#[test]
fn apply_matches_entrywise_loop() {
    let mut r = rng(40);
    let phi = random_gaussian(&mut r, 3, 3);
    let x = random_gaussian(&mut r, 3, 3);
    let y = schur_apply(&mask(phi.clone()), &x).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(y[(i, j)], phi[(i, j)] * x[(i, j)]);
        }
    }
    let ones = ComplexMatrix::from_element(3, 3, cplx(1.0, 0.0));
    assert_eq!(schur_apply(&mask(ones), &x).unwrap(), x);
    assert!(schur_apply(&mask(phi), &random_gaussian(&mut r, 2, 2)).is_err());
}

#[test]
fn apply_zeroes_outside_the_support() {
    let phi = mat(2, 2, &[1.0, 2.0, 0.0, 3.0]);
    let support: BTreeSet<_> = [(0, 0), (0, 1), (1, 1)].into();
    let m = MultiplierMask::with_support(phi.clone(), Some(support.clone())).unwrap();
    let x = mat(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert_eq!(schur_apply(&m, &x).unwrap(), phi);
    // A symbol that does not vanish off its support is rejected.
    assert!(MultiplierMask::with_support(mat(2, 2, &[1.0, 1.0, 1.0, 1.0]), Some(support)).is_err());
    assert!(MultiplierMask::with_support(phi, Some([(2, 0)].into())).is_err());
    assert!(MultiplierMask::new(random_gaussian(&mut rng(0), 2, 3)).is_err());
}

#[test]
fn identity_symbol_norm() {
    for n in [2, 3] {
        let ones = mask(ComplexMatrix::from_element(n, n, cplx(1.0, 0.0)));
        for (p, q) in [(2.0, 1.0), (4.0, 1.5), (f64::INFINITY, 2.0)] {
            let est = schur_norm(&ones, p, q, budget()).unwrap();
            let want = (n as f64).powf(1.0 / q - 1.0 / p);
            assert!(close(est.value, want, 1e-6), "n={n} p={p} q={q}: {} vs {want}", est.value);
        }
    }
}

#[test]
fn coordinate_symbol_norm() {
    let e11 = mask(mat(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    let est = schur_norm(&e11, 4.0, 1.5, budget()).unwrap();
    assert!(close(est.value, 1.0, 1e-9));
    assert!(close(schatten_norm(&est.maximizer, 4.0).unwrap(), 1.0, 1e-12));
}

#[test]
fn diagonal_symbol_is_a_vector_multiplier() {
    // On diagonal inputs the multiplier is d ↦ (d_i x_i): brute force over the
    // diagonal ℓ_p sphere, and Hölder's closed form ‖d‖_r.
    for (p, q) in [(4.0, 1.5), (3.0, 2.0), (f64::INFINITY, 1.0)] {
        let d = [1.3, -0.4];
        let est = schur_norm(&mask(diag(&d)), p, q, budget()).unwrap();
        let mut grid = 0.0f64;
        for k in 0..=20000 {
            let t = k as f64 / 20000.0 * std::f64::consts::FRAC_PI_2;
            let (c, s) = (t.cos(), t.sin());
            let x = if p.is_infinite() { [1.0, 1.0] } else {
                let n = (c.powf(p) + s.powf(p)).powf(1.0 / p);
                [c / n, s / n]
            };
            grid = grid.max(lp_of(&[d[0].abs() * x[0], d[1].abs() * x[1]], q));
        }
        let closed = lp_of(&[1.3, 0.4], multiplier_exponent(p, q));
        assert!(close(grid, closed, 1e-6));
        assert!(close(est.value, closed, 1e-6), "p={p} q={q}: {} vs {closed}", est.value);
    }
}

#[test]
fn norm_estimate_matches_sampling_oracle() {
    let mut r = rng(41);
    for (p, q) in [(4.0, 1.5), (f64::INFINITY, 1.0)] {
        let phi = random_gaussian(&mut r, 2, 2);
        let est = schur_norm(&mask(phi.clone()), p, q, budget()).unwrap();
        let oracle = sampled_norm(&phi, p, q, 20_000, &mut r);
        assert!(est.value >= oracle * 0.99, "p={p} q={q}: {} vs {oracle}", est.value);
        assert!(est.value <= oracle * 1.01);
    }
}

#[test]
fn schur_norm_needs_ordered_exponents() {
    let m = mask(diag(&[1.0, 1.0]));
    assert!(schur_norm(&m, 1.5, 1.0, budget()).is_err());
    assert!(schur_norm(&m, 4.0, 3.0, budget()).is_err());
}

#[test]
fn single_row_symbol_decomposes_into_rows() {
    let phi = mat(3, 3, &[0.0, 0.0, 0.0, 0.5, -2.0, 1.0, 0.0, 0.0, 0.0]);
    let d = ell_r_linf_decompose(&mask(phi.clone()), 2.0, budget()).unwrap();
    assert!(close(d.objective, 2.0, 1e-12), "{}", d.objective);
    assert!((&d.phi1 + &d.phi2 - &phi).norm() == 0.0);
}

#[test]
fn disjoint_row_and_column_parts() {
    // φ_r fills row 0, φ_c fills column 2 below it; the construction costs 2.
    let mut phi = ComplexMatrix::zeros(3, 3);
    phi[(0, 0)] = cplx(1.0, 0.0);
    phi[(0, 1)] = cplx(-1.0, 0.0);
    phi[(1, 2)] = cplx(0.0, 1.0);
    phi[(2, 2)] = cplx(1.0, 0.0);
    let construction = 2.0;
    let d = ell_r_linf_decompose(&mask(phi.clone()), 1.0, budget()).unwrap();
    // At r = 1 the problem is the vertex-cover LP R_i + C_j ≥ |φ_ij|, whose
    // dual is a maximum-weight matching: (0,0) and (1,2) give weight 2.
    assert!(lr_linf_norm(&phi, 1.0) > construction);
    assert!(lr_linf_norm(&phi.transpose(), 1.0) > construction);
    assert!(close(d.objective, construction, 1e-9), "{}", d.objective);
    assert_eq!(&d.phi1 + &d.phi2, phi);
}

#[test]
fn all_ones_two_by_two_matches_scan() {
    // φ1 = t·J, φ2 = (1−t)·J is the symmetric family; with row bounds (a, b)
    // the column part costs max(1−a, 1−b) per column.
    for r in [1.0, 2.0, 4.0] {
        let ones = ComplexMatrix::from_element(2, 2, cplx(1.0, 0.0));
        let d = ell_r_linf_decompose(&mask(ones), r, budget()).unwrap();
        let mut scan = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let (a, b) = (i as f64 / 400.0, j as f64 / 400.0);
                let c = (1.0 - a).max(1.0 - b);
                scan = scan.min(lp_of(&[a, b], r) + lp_of(&[c, c], r));
            }
        }
        assert!(d.objective <= 2f64.powf(1.0 / r) + 1e-12);
        assert!(close(d.objective, scan, 1e-9), "r={r}: {} vs {scan}", d.objective);
    }
}

#[test]
fn decomposition_is_an_upper_bound() {
    let mut r = rng(42);
    for (p, q) in [(4.0, 1.5), (f64::INFINITY, 1.0), (3.0, 2.0)] {
        let rr = multiplier_exponent(p, q);
        for _ in 0..3 {
            let phi = random_gaussian(&mut r, 2, 2);
            let m = mask(phi);
            let lower = schur_norm(&m, p, q, budget()).unwrap().value;
            let upper = ell_r_linf_decompose(&m, rr, budget()).unwrap().objective;
            assert!(lower <= upper * (1.0 + 1e-9), "{lower} > {upper}");
        }
    }
}

#[test]
fn membership_holds_on_samples() {
    // |Σ φ x y| ≤ ‖φ‖_{ℓ_r(ℓ_∞)} ‖x‖_p ‖y‖_{q'} for both parts of the split.
    let mut r = rng(43);
    let (p, q) = (4.0, 1.5);
    let rr = multiplier_exponent(p, q);
    let qc = conj_exponent(q);
    let phi = random_gaussian(&mut r, 3, 3);
    let d = ell_r_linf_decompose(&mask(phi), rr, budget()).unwrap();
    let (n1, n2) = (lr_linf_norm(&d.phi1, rr), lr_linf_norm(&d.phi2.transpose(), rr));
    for _ in 0..2000 {
        let (x, y) = (random_gaussian(&mut r, 3, 3), random_gaussian(&mut r, 3, 3));
        let scale = schatten_norm(&x, p).unwrap() * schatten_norm(&y, qc).unwrap();
        assert!(bilinear_pairing(&d.phi1, &x, &y).norm() <= n1 * scale * (1.0 + 1e-8));
        assert!(bilinear_pairing(&d.phi2, &x, &y).norm() <= n2 * scale * (1.0 + 1e-8));
    }
}

#[test]
fn objectives_are_transpose_symmetric() {
    let mut r = rng(44);
    for _ in 0..5 {
        let phi = random_gaussian(&mut r, 3, 3);
        let (m, t) = (mask(phi.clone()), mask(phi.transpose()));
        let (a, b) = (ell_r_linf_decompose(&m, 2.0, budget()).unwrap(), ell_r_linf_decompose(&t, 2.0, budget()).unwrap());
        assert_eq!(a.objective, b.objective);
        let (a, b) = (rank_one_dominate(&m, 2.0, budget()).unwrap(), rank_one_dominate(&t, 2.0, budget()).unwrap());
        assert!(close(a.objective, b.objective, 1e-12));
    }
}

#[test]
fn objectives_are_homogeneous() {
    let mut r = rng(45);
    let phi = random_gaussian(&mut r, 3, 3);
    let m = mask(phi);
    for c in [0.1, 3.0, 250.0] {
        let s = m.scaled(c);
        let a = ell_r_linf_decompose(&m, 2.0, budget()).unwrap().objective;
        let b = ell_r_linf_decompose(&s, 2.0, budget()).unwrap().objective;
        assert!(close(b, c * a, 1e-10), "{b} vs {}", c * a);
        let a = rank_one_dominate(&m, 2.0, budget()).unwrap().objective;
        let b = rank_one_dominate(&s, 2.0, budget()).unwrap().objective;
        assert!(close(b, c * a, 1e-10));
    }
}

#[test]
fn rank_one_modulus_is_recovered_exactly() {
    let mut r = rng(46);
    for rr in [1.0, 2.0, 3.0] {
        for n in [2, 3, 4] {
            let a: Vec<f64> = (0..n).map(|_| r.random_range(0.1..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| r.random_range(0.1..2.0)).collect();
            let phi = ComplexMatrix::from_fn(n, n, |i, j| {
                let t: f64 = (i * n + j) as f64;
                cplx(a[i] * b[j] * t.cos(), a[i] * b[j] * t.sin())
            });
            let d = rank_one_dominate(&mask(phi.clone()), rr, budget()).unwrap();
            let want = lp_of(&a, 2.0 * rr) * lp_of(&b, 2.0 * rr);
            assert!(close(d.objective, want, 1e-9), "{} vs {want}", d.objective);
            assert!(close(lp_of(&d.alpha, 2.0 * rr), lp_of(&d.beta, 2.0 * rr), 1e-9));
            for i in 0..n {
                for j in 0..n {
                    assert!(d.alpha[i] * d.beta[j] >= phi[(i, j)].norm() * (1.0 - 1e-12));
                }
            }
        }
    }
}

#[test]
fn identity_mask_domination() {
    for n in [2, 3, 5] {
        for rr in [1.0, 2.0] {
            let id = ComplexMatrix::identity(n, n);
            let d = rank_one_dominate(&mask(id), rr, budget()).unwrap();
            assert!(close(d.objective, (n as f64).powf(1.0 / rr), 1e-9), "{}", d.objective);
            assert!(d.alpha.iter().all(|a| close(*a, 1.0, 1e-6)));
        }
    }
}

#[test]
fn domination_matches_log_grid() {
    let mut r = rng(47);
    for rr in [1.0, 2.0, 3.0] {
        for _ in 0..2 {
            let phi = random_gaussian(&mut r, 2, 2);
            let d = rank_one_dominate(&mask(phi.clone()), rr, budget()).unwrap();
            let g = domination_grid(&phi, rr);
            assert!((d.objective - g).abs() <= 1e-3 * g, "{} vs {g}", d.objective);
        }
    }
}

#[test]
fn zero_symbol() {
    let z = mask(ComplexMatrix::zeros(2, 2));
    let d = rank_one_dominate(&z, 2.0, budget()).unwrap();
    assert_eq!(d.objective, 0.0);
    assert!(d.alpha.iter().chain(&d.beta).all(|v| *v == 0.0));
    assert_eq!(ell_r_linf_decompose(&z, 2.0, budget()).unwrap().objective, 0.0);
    assert_eq!(schur_norm(&z, 4.0, 1.5, budget()).unwrap().value, 0.0);
}

#[test]
fn amplified_lower_bound_respects_rank_one_witness() {
    // For φ_ij = a_i b_j the multiplier is x ↦ D_a x D_b, whose cb norm from
    // S_p to S_{p'} is at most ‖a‖_{2r}‖b‖_{2r}, r = conj(p/2).
    let p = 4.0;
    let phi = ComplexMatrix::from_fn(2, 2, |i, j| cplx([1.0, 0.5][i] * [0.7, 1.2][j], 0.0));
    let m = mask(phi);
    let levels = schur_cb_lower(&m, p, conj_exponent(p), 2, Budget::new(2, 100, 0)).unwrap();
    let upper = rank_one_dominate(&m, conj_exponent(p / 2.0), budget()).unwrap().objective;
    assert_eq!(levels.len(), 2);
    for l in levels {
        assert!(l <= upper * (1.0 + 1e-9), "{l} > {upper}");
    }
    assert!(schur_cb_lower(&m, p, 1.5, 4, budget()).is_err());
}

#[test]
fn extension_by_zero_is_reported() {
    let phi = mat(2, 2, &[1.0, 0.5, 0.0, -1.0]);
    let support: BTreeSet<_> = [(0, 0), (0, 1), (1, 1)].into();
    let m = MultiplierMask::with_support(phi.clone(), Some(support)).unwrap();
    let rep = extension_experiment(&m, 4.0, 1.5, budget()).unwrap();
    assert!(rep.ratio.is_finite() && rep.ratio >= 1.0 - 1e-9);
    assert_eq!(&rep.extension.phi1 + &rep.extension.phi2, phi);
    assert!(close(rep.ratio, rep.extension_objective / rep.restricted_lower, 1e-15));
}

#[test]
fn exponents() {
    assert_eq!(multiplier_exponent(f64::INFINITY, 1.5), 1.5);
    assert_eq!(multiplier_exponent(2.0, 2.0), f64::INFINITY);
    assert!(close(multiplier_exponent(4.0, 2.0), 4.0, 1e-15));
}

#[test]
fn mask_json_round_trip() {
    let phi = mat(2, 2, &[1.0, 0.5, 0.0, -1.0]);
    let m = MultiplierMask::with_support(phi, Some([(0, 0), (0, 1), (1, 1)].into())).unwrap();
    let text = serde_json::to_string(&m).unwrap();
    let back: MultiplierMask = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
    let bad = r#"{"phi": {"rows": 2, "cols": 2, "re": [1, 1, 1, 1]}, "support": [[0, 0]]}"#;
    let err = serde_json::from_str::<MultiplierMask>(bad).unwrap_err().to_string();
    assert!(err.contains("outside the support"), "{err}");
}
