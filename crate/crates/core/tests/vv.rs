mod common;

use common::*;
use nclp::linalg::{cplx, identity, kron, random_gaussian, random_unitary, unit, zeros, ComplexMatrix};
use nclp::rng::Budget;
use nclp::schatten::{schatten_norm, LpParams};
use nclp::vv::*;
use proptest::prelude::*;

#[test]
fn level_one_is_schatten() {
    let x = random_gaussian(&mut rng(1), 3, 3);
    let e = VvElement::new(vec![vec![x.clone()]]).unwrap();
    for p in [1.0, 2.5, f64::INFINITY] {
        assert!(close(vv_norm(&e, p).unwrap(), schatten_norm(&x, p).unwrap(), 1e-14));
    }
}

#[test]
fn block_diagonal_is_direct_sum() {
    let mut r = rng(2);
    let (x, y) = (random_gaussian(&mut r, 2, 2), random_gaussian(&mut r, 2, 2));
    let z = ComplexMatrix::zeros(2, 2);
    let e = VvElement::new(vec![vec![x.clone(), z.clone()], vec![z, y.clone()]]).unwrap();
    let p = 3.0;
    let want = (schatten_norm(&x, p).unwrap().powf(p) + schatten_norm(&y, p).unwrap().powf(p)).powf(1.0 / p);
    assert!(close(vv_norm(&e, p).unwrap(), want, 1e-12));
}

#[test]
fn block_norm_matches_flattened_oracle() {
    let mut r = rng(3);
    let blocks: Vec<Vec<ComplexMatrix>> = (0..2).map(|_| (0..2).map(|_| random_gaussian(&mut r, 2, 2)).collect()).collect();
    let mut flat = ComplexMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            flat.view_mut((2 * a, 2 * b), (2, 2)).copy_from(&blocks[a][b]);
        }
    }
    let e = VvElement::new(blocks).unwrap();
    for p in [1.0, 2.0, 4.0, f64::INFINITY] {
        assert!(close(vv_norm(&e, p).unwrap(), schatten_by_eig(&flat, p), 1e-10));
    }
}

#[test]
fn ragged_blocks_rejected() {
    let x = ComplexMatrix::zeros(2, 2);
    assert!(VvElement::new(vec![vec![x.clone(), x.clone()], vec![x.clone()]]).is_err());
    assert!(VvElement::new(vec![vec![x.clone()], vec![ComplexMatrix::zeros(3, 3)]]).is_err());
}

#[test]
fn column_row_examples() {
    let x = random_gaussian(&mut rng(4), 2, 2);
    assert!(close(column_norm(&[x.clone()], 3.0).unwrap(), schatten_norm(&x, 3.0).unwrap(), 1e-12));
    assert!(close(row_norm(&[x.clone()], 3.0).unwrap(), schatten_norm(&x, 3.0).unwrap(), 1e-12));

    let xs = [unit(2, 0, 0), unit(2, 1, 0)];
    assert!(close(column_norm(&xs, 4.0).unwrap(), 2f64.sqrt(), 1e-14));
    assert_eq!(column_norm(&[], 4.0).unwrap(), 0.0);
    assert_eq!(row_norm(&[], 4.0).unwrap(), 0.0);
    assert!(column_norm(&[unit(2, 0, 0), unit(3, 0, 0)], 2.0).is_err());
}

#[test]
fn commuting_diagonals_reduce_to_mixed_lp_l2() {
    let ds = [[1.0, -2.0, 0.5], [0.3, 1.0, 2.0], [0.0, 1.5, -1.0]];
    let xs: Vec<ComplexMatrix> = ds.iter().map(|d| diag(d)).collect();
    for p in [2.0, 3.0, 6.0] {
        let slots: Vec<f64> = (0..3).map(|i| ds.iter().map(|d| d[i] * d[i]).sum::<f64>().sqrt()).collect();
        let want = slots.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
        assert!(close(column_norm(&xs, p).unwrap(), want, 1e-12));
        assert!(close(row_norm(&xs, p).unwrap(), want, 1e-12));
    }
}

fn budget() -> Budget {
    Budget::new(8, 300, 0)
}

#[test]
fn spcq_at_theta_zero_is_the_column_norm() {
    let mut r = rng(5);
    for _ in 0..5 {
        let xs: Vec<ComplexMatrix> = (0..3).map(|_| random_gaussian(&mut r, 2, 2)).collect();
        let v = spcq_norm(&xs, LpParams::with_theta(4.0, 0.0).unwrap(), budget()).unwrap();
        assert!(close(v.value, column_norm(&xs, 4.0).unwrap(), 1e-8), "{} vs {}", v.value, column_norm(&xs, 4.0).unwrap());
    }
}

/// sup over positive diagonal α, β on a grid, for a diagonal x.
fn diagonal_grid_oracle(d: [f64; 2], p: f64, theta: f64) -> f64 {
    let r = LpParams::new(p).unwrap().r().unwrap();
    let sa = if theta == 0.0 { f64::INFINITY } else { 2.0 * r / theta };
    let sb = if theta == 1.0 { f64::INFINITY } else { 2.0 * r / (1.0 - theta) };
    let ball = |t: f64, s: f64| if s.is_infinite() { [1.0, 1.0] } else { [t.powf(1.0 / s), (1.0 - t).powf(1.0 / s)] };
    let mut best = 0.0f64;
    for i in 0..=400 {
        for j in 0..=400 {
            let (a, b) = (ball(i as f64 / 400.0, sa), ball(j as f64 / 400.0, sb));
            let v = (0..2).map(|k| (a[k] * d[k] * b[k]).powi(2)).sum::<f64>().sqrt();
            best = best.max(v);
        }
    }
    best
}

#[test]
fn spcq_single_element_is_the_schatten_norm() {
    let d = [1.7, 0.6];
    for theta in [0.0, 0.3, 0.5, 1.0] {
        let params = LpParams::with_theta(4.0, theta).unwrap();
        let v = spcq_norm(&[diag(&d)], params, budget()).unwrap().value;
        let grid = diagonal_grid_oracle(d, 4.0, theta);
        assert!(close(v, schatten_norm(&diag(&d), 4.0).unwrap(), 1e-8), "θ={theta}: {v}");
        assert!(v >= grid - 1e-12 && v <= grid * (1.0 + 2e-3), "θ={theta}: {v} vs grid {grid}");
    }
    let x = random_gaussian(&mut rng(6), 3, 3);
    let v = spcq_norm(&[x.clone()], LpParams::with_theta(3.0, 0.5).unwrap(), budget()).unwrap().value;
    assert!(close(v, schatten_norm(&x, 3.0).unwrap(), 1e-7));
}

#[test]
fn spcq_identical_copies_scale_like_l2() {
    let x = identity(2).scale(0.5);
    let params = LpParams::with_theta(4.0, 0.4).unwrap();
    let one = spcq_norm(&[x.clone()], params, budget()).unwrap().value;
    let many = spcq_norm(&[x.clone(), x.clone(), x.clone()], params, budget()).unwrap().value;
    assert!(close(many, 3f64.sqrt() * one, 1e-9));
}

#[test]
fn spcq_rejects_bad_parameters() {
    let x = vec![identity(2)];
    assert!(spcq_norm(&x, LpParams::with_theta(2.0, 0.5).unwrap(), budget()).is_err());
    assert!(spcq_norm(&x, LpParams::new(4.0).unwrap(), budget()).is_err());
    assert!(LpParams::with_theta(4.0, -0.1).is_err());
}

#[test]
fn spcq_never_decreases_with_more_restarts() {
    let mut r = rng(7);
    let xs: Vec<ComplexMatrix> = (0..3).map(|_| random_gaussian(&mut r, 3, 3)).collect();
    let params = LpParams::with_theta(5.0, 0.6).unwrap();
    let mut last = 0.0;
    for restarts in [1, 2, 4, 8] {
        let v = spcq_norm(&xs, params, Budget::new(restarts, 300, 11)).unwrap().value;
        assert!(v >= last - 1e-12, "{restarts}: {v} < {last}");
        last = v;
    }
}

#[test]
fn spcq_interpolates_on_commuting_families() {
    let xs = vec![diag(&[1.0, 0.2]), diag(&[0.3, 1.4]), diag(&[0.8, -0.5])];
    let at = |t: f64| spcq_norm(&xs, LpParams::with_theta(4.0, t).unwrap(), budget()).unwrap().value;
    let (lo, hi) = (at(0.0).min(at(1.0)), at(0.0).max(at(1.0)));
    for t in [0.25, 0.5, 0.75] {
        let v = at(t);
        assert!(v >= lo - 1e-8 && v <= hi + 1e-8, "θ={t}: {v} outside [{lo}, {hi}]");
    }
}

#[test]
fn cb_estimate_of_identity_is_one() {
    let space = random_space(&mut rng(8), 4.0);
    let u = LinearMapOnSubspace::new(space.clone(), Codomain::Subspace { space }, identity(2)).unwrap();
    let est = cb_norm_estimate(&u, 4.0, 3, Budget::new(2, 100, 0)).unwrap();
    assert_eq!(est.len(), 3);
    for v in est {
        assert!(v >= 1.0 - 1e-9 && v <= 1.0 + 1e-9, "{v}");
    }
}

#[test]
fn cb_estimate_scales_with_the_map() {
    let space = random_space(&mut rng(9), 3.0);
    let c = cplx(-1.5, 2.0);
    let u = LinearMapOnSubspace::new(space.clone(), Codomain::Subspace { space }, identity(2).map(|z| z * c)).unwrap();
    for v in cb_norm_estimate(&u, 3.0, 2, Budget::new(2, 100, 0)).unwrap() {
        assert!(close(v, c.norm(), 1e-9));
    }
}

#[test]
fn cb_estimate_of_a_diagonal_permutation_is_one() {
    let space = diagonal_space(4.0);
    let swap = mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let u = LinearMapOnSubspace::new(space.clone(), Codomain::Subspace { space: space.clone() }, swap.clone()).unwrap();
    let est = cb_norm_estimate(&u, 4.0, 3, Budget::new(2, 100, 0)).unwrap();
    for v in &est {
        assert!(close(*v, 1.0, 1e-9), "{est:?}");
    }
    // The permuted element has the same flattened singular values.
    let x = VvElement::from_coordinates(&space, &[random_gaussian(&mut rng(1), 2, 2), random_gaussian(&mut rng(2), 2, 2)]).unwrap();
    let y = VvElement::new(x.blocks().iter().map(|row| row.iter().map(|b| &swap * b * &swap).collect()).collect()).unwrap();
    assert!(close(schatten_by_eig(&x.flatten(), 4.0), schatten_by_eig(&y.flatten(), 4.0), 1e-10));
}

#[test]
fn cb_estimates_are_nondecreasing() {
    let space = random_space(&mut rng(10), 4.0);
    let coeffs = random_gaussian(&mut rng(11), 2, 2);
    let u = LinearMapOnSubspace::new(space.clone(), Codomain::Subspace { space }, coeffs).unwrap();
    let est = cb_norm_estimate(&u, 4.0, 3, Budget::new(2, 60, 0)).unwrap();
    assert!(est.windows(2).all(|w| w[0] <= w[1]), "{est:?}");
    assert!(cb_norm_estimate(&u, 4.0, 0, Budget::default()).is_err());
}

#[test]
fn linear_map_shape_is_checked() {
    let space = diagonal_space(4.0);
    assert!(LinearMapOnSubspace::new(space.clone(), Codomain::Column { dim: 3 }, identity(2)).is_err());
    assert!(LinearMapOnSubspace::new(space, Codomain::ColumnQ { dim: 2, theta: 2.0 }, identity(2)).is_err());
}

#[test]
fn subspace_validation() {
    assert!(MatrixSubspace::new(2, 4.0, vec![unit(2, 0, 0), unit(2, 0, 0)]).is_err());
    assert!(MatrixSubspace::new(2, 4.0, vec![unit(3, 0, 0)]).is_err());
    assert!(MatrixSubspace::new(2, 4.0, vec![]).is_err());
    let s = MatrixSubspace::new(2, 4.0, vec![unit(2, 0, 0), unit(2, 0, 1)]).unwrap();
    assert!(close(s.condition_number(), 1.0, 1e-12));
}

#[test]
fn subspace_json_round_trip() {
    let s = random_space(&mut rng(12), f64::INFINITY);
    let text = serde_json::to_string(&s).unwrap();
    assert!(text.contains("\"inf\""));
    let back: MatrixSubspace = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}

#[test]
fn mult_map_examples() {
    let mut r = rng(13);
    let x = VvElement::new(vec![vec![random_gaussian(&mut r, 2, 2), random_gaussian(&mut r, 2, 2)], vec![random_gaussian(&mut r, 2, 2), random_gaussian(&mut r, 2, 2)]]).unwrap();
    let same = mult_map(&identity(2), &x, &identity(2), 3.0, 3.0).unwrap();
    assert_eq!(same.element, x);

    // Diagonal, aligned: a = b = diag(1, 0) picks the top-left entry of each block.
    let d = VvElement::new(vec![vec![diag(&[2.0, 1.0])]]).unwrap();
    let a = diag(&[1.0, 0.0]);
    let res = mult_map(&a, &d, &a, 2.0, 4.0).unwrap();
    assert!(close(vv_norm(&res.element, 2.0).unwrap(), 2.0, 1e-14));
    assert!(res.contractive);

    // Level 2, x = I, a = b on the S_{2r} unit sphere: the bound is attained.
    let (p, q) = (1.5, 4.0);
    let inv_r = 1.0 / p - 1.0 / q;
    let half_ball = identity(2).scale(2f64.powf(-inv_r / 2.0));
    let eye = VvElement::new(vec![vec![identity(2), zeros(2, 2)], vec![zeros(2, 2), identity(2)]]).unwrap();
    let res = mult_map(&half_ball, &eye, &half_ball, p, q).unwrap();
    let lhs = vv_norm(&res.element, p).unwrap();
    assert!(close(lhs, res.bound_factor * vv_norm(&eye, q).unwrap(), 1e-12));
    assert!(close(res.bound_factor, 2f64.powf(inv_r), 1e-12));
    assert!(mult_map(&identity(3), &x, &identity(2), 2.0, 2.0).is_err());
    assert!(mult_map(&identity(2), &x, &identity(2), 4.0, 2.0).is_err());
}

#[test]
fn lp_sum_is_dominated_by_both_square_functions() {
    let mut r = rng(14);
    for _ in 0..100 {
        let xs: Vec<ComplexMatrix> = (0..3).map(|_| random_gaussian(&mut r, 3, 3)).collect();
        for p in [2.0, 3.0, 6.0] {
            let s = lp_sum_norm(&xs, p).unwrap();
            assert!(s <= column_norm(&xs, p).unwrap() + 1e-9);
            assert!(s <= row_norm(&xs, p).unwrap() + 1e-9);
        }
    }
}

fn mats(n: usize, len: usize) -> impl Strategy<Value = Vec<ComplexMatrix>> {
    proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 2 * n * n), len).prop_map(move |vs| {
        vs.into_iter()
            .map(|v| ComplexMatrix::from_fn(n, n, |i, j| cplx(v[2 * (i * n + j)], v[2 * (i * n + j) + 1])))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_convexity(a in mats(2, 2), b in mats(2, 3), p in 2.0f64..8.0) {
        let ab: Vec<ComplexMatrix> = a.iter().chain(&b).cloned().collect();
        let rows = row_norm(&ab, p).unwrap();
        prop_assert!(rows <= (row_norm(&a, p).unwrap().powi(2) + row_norm(&b, p).unwrap().powi(2)).sqrt() + 1e-9);
        let cols = column_norm(&ab, p).unwrap();
        prop_assert!(cols <= (column_norm(&a, p).unwrap().powi(2) + column_norm(&b, p).unwrap().powi(2)).sqrt() + 1e-9);
    }

    #[test]
    fn unitary_conjugation_invariance(blocks in mats(2, 4), seed in 0u64..500, p in 1.0f64..6.0) {
        let x = VvElement::new(vec![blocks[..2].to_vec(), blocks[2..].to_vec()]).unwrap();
        let mut r = rng(seed);
        let (u, v) = (random_unitary(&mut r, 2), random_unitary(&mut r, 2));
        let flat = x.flatten();
        let inner = kron(&identity(2), &u) * &flat * kron(&identity(2), &u.adjoint());
        let outer = kron(&v, &identity(2)) * &flat * kron(&v.adjoint(), &identity(2));
        let base = schatten_norm(&flat, p).unwrap();
        prop_assert!((schatten_norm(&inner, p).unwrap() - base).abs() <= 1e-9 * (1.0 + base));
        prop_assert!((schatten_norm(&outer, p).unwrap() - base).abs() <= 1e-9 * (1.0 + base));
    }

    #[test]
    fn mult_map_contract(blocks in mats(2, 4), a in mats(2, 1), b in mats(2, 1), p in 1.0f64..3.0, extra in 0.0f64..3.0) {
        let q = p + extra;
        let x = VvElement::new(vec![blocks[..2].to_vec(), blocks[2..].to_vec()]).unwrap();
        let res = mult_map(&a[0], &x, &b[0], p, q).unwrap();
        let lhs = vv_norm(&res.element, p).unwrap();
        prop_assert!(lhs <= res.bound_factor * vv_norm(&x, q).unwrap() * (1.0 + 1e-9) + 1e-9);
    }
}
