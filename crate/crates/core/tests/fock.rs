mod common;

use common::*;
use nclp::fock::*;
use nclp::linalg::{cplx, max_abs_diff, random_gaussian, ComplexMatrix, C64};
use rand::Rng;

fn word(s: &str) -> ModularWord {
    s.parse().unwrap()
}

fn moment(s: &str, sys: &CircularSystem) -> C64 {
    vacuum_moment(&word(s), sys).unwrap()
}

#[test]
fn creation_and_annihilation_on_short_words() {
    let sp = FockSpace::new(2, 3).unwrap();
    let omega = sp.vacuum();
    let e1 = FockVector::basis(sp.index_of(&[1]).unwrap());
    let e2 = FockVector::basis(sp.index_of(&[2]).unwrap());
    assert_eq!(sp.creation(1).unwrap().apply(&omega), e1);
    assert_eq!(sp.annihilation(1).unwrap().apply(&e1), omega);
    assert!(sp.annihilation(1).unwrap().apply(&e2).is_empty());
    assert!(sp.creation(3).is_err());
    assert!(sp.creation(0).is_err());
}

#[test]
fn annihilation_after_creation_is_identity_below_the_top_degree() {
    let sp = FockSpace::new(2, 3).unwrap();
    let below = sp.dim_up_to(2);
    for j in [-2, -1, 1, 2] {
        for k in [-2, -1, 1, 2] {
            let prod = sp.annihilation(j).unwrap().mul(&sp.creation(k).unwrap()).to_dense();
            let want = ComplexMatrix::from_fn(sp.dim(), sp.dim(), |a, b| {
                if a == b && a < below && j == k { cplx(1.0, 0.0) } else { cplx(0.0, 0.0) }
            });
            assert_eq!(max_abs_diff(&prod, &want), 0.0, "j={j} k={k}");
        }
    }
}

#[test]
fn fock_dimension() {
    let sp = FockSpace::new(3, 4).unwrap();
    assert_eq!(sp.dim(), (0..=4).map(|n| 6usize.pow(n)).sum::<usize>());
    for i in 0..sp.dim() {
        assert_eq!(sp.index_of(&sp.word_of(i)).unwrap(), i);
    }
}

#[test]
fn generators_on_the_vacuum() {
    let sys = CircularSystem::new(vec![2.0, 0.5], 0.5, 3).unwrap();
    let sp = &sys.space;
    for (k, &lam) in sys.lambdas.iter().enumerate() {
        let mode = k + 1;
        let s = sys.s_matrix(mode).unwrap();
        let e_plus = sp.index_of(&[mode as i32]).unwrap();
        let e_minus = sp.index_of(&[-(mode as i32)]).unwrap();
        let v = s.apply(&sp.vacuum());
        assert_eq!(v, FockVector::basis(e_plus));
        let w = s.adjoint().apply(&sp.vacuum());
        assert!((w.get(e_minus) - cplx(1.0 / lam, 0.0)).norm() < 1e-15);
        let g = sys.g_matrix(mode).unwrap().to_dense();
        assert!(max_abs_diff(&g, &(s.to_dense() * cplx(lam.powf(0.5), 0.0))) < 1e-15);
    }
}

#[test]
fn orthogonality_relation_over_the_grid() {
    let lams = [0.5, 1.0, 2.0];
    for kk in 1..=3usize {
        for theta in [0.0, 0.5, 1.0] {
            for combo in 0..3usize.pow(kk as u32) {
                let lambdas: Vec<f64> = (0..kk).map(|i| lams[combo / 3usize.pow(i as u32) % 3]).collect();
                let sys = CircularSystem::new(lambdas.clone(), theta, 2).unwrap();
                for eta in [0.0, 0.25, 0.5, 1.0] {
                    for j in 1..=kk {
                        for k in 1..=kk {
                            let got = moment(&format!("g{j}* D^{eta} g{k} D^{}", 1.0 - eta), &sys);
                            let want = if j == k { lambdas[k - 1].powf(2.0 * (theta - eta)) } else { 0.0 };
                            assert!((got - cplx(want, 0.0)).norm() <= 1e-12, "{lambdas:?} θ={theta} η={eta} j={j} k={k}: {got}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn simple_moments() {
    let sys = CircularSystem::new(vec![2.0, 0.5, 3.0], 0.3, 4).unwrap();
    assert_eq!(vacuum_moment(&ModularWord::default(), &sys).unwrap(), cplx(1.0, 0.0));
    for j in 1..=3 {
        for k in 1..=3 {
            assert_eq!(moment(&format!("g{j} g{k}"), &sys), cplx(0.0, 0.0));
        }
    }
    // ρ(g* g) = λ^{2θ} ‖s Ω‖² = λ^{2θ}; ρ(g g*) = λ^{2θ−2}.
    assert!((moment("g1* g1", &sys).re - 2f64.powf(0.6)).abs() < 1e-14);
    assert!((moment("g1 g1*", &sys).re - 2f64.powf(0.6 - 2.0)).abs() < 1e-14);
}

#[test]
fn rewrite_moves_density_to_the_right() {
    let sys = CircularSystem::new(vec![2.0], 0.0, 2).unwrap();
    // D^s g = λ^{-2s} g D^s and D^s g* = λ^{2s} g* D^s.
    let (c, plain) = rewrite(&word("D^0.5 g1"), &sys).unwrap();
    assert!((c - 0.5).abs() < 1e-15);
    assert_eq!(plain, vec![(1, false)]);
    let (c, _) = rewrite(&word("D^(1/2) g1*"), &sys).unwrap();
    assert!((c - 2.0).abs() < 1e-15);
}

#[test]
fn word_syntax() {
    let w = word("g1* D^1/4 g2 D^0.75");
    assert_eq!(w.g_len(), 2);
    assert!((w.total_density_power() - 1.0).abs() < 1e-15);
    for bad in ["g0", "h1", "D^x", "g1**"] {
        assert!(bad.parse::<ModularWord>().is_err(), "{bad}");
    }
}

#[test]
fn moments_refuse_long_words_and_bad_powers() {
    let sys = CircularSystem::new(vec![1.0], 0.5, 2).unwrap();
    assert!(vacuum_moment(&word("g1* g1 g1* g1"), &sys).is_err());
    assert!(vacuum_moment(&word("g1* D^2 g1"), &sys).is_err());
    assert!(CircularSystem::new(vec![0.0], 0.5, 2).is_err());
    assert!(CircularSystem::new(vec![1.0], 1.5, 2).is_err());
}

fn random_word(r: &mut impl Rng, kk: usize, len: usize) -> ModularWord {
    let mut letters = Vec::new();
    let mut budget = 1.0;
    for _ in 0..len {
        if r.random_bool(0.5) {
            let s = (r.random_range(0..=4) as f64 / 8.0).min(budget);
            budget -= s;
            letters.push(Letter::D(s));
        }
        letters.push(Letter::G { mode: r.random_range(1..=kk), adjoint: r.random_bool(0.5) });
    }
    ModularWord { letters }
}

#[test]
fn truncation_does_not_change_moments() {
    let mut r = rng(20);
    for _ in 0..200 {
        let kk = r.random_range(1..=3);
        let lambdas: Vec<f64> = (0..kk).map(|_| [0.5, 1.0, 2.0, 3.0][r.random_range(0..4)]).collect();
        let len = r.random_range(0..=4);
        let w = random_word(&mut r, kk, len);
        let small = CircularSystem::new(lambdas.clone(), 0.5, len.max(1)).unwrap();
        let large = small.with_degree(len.max(1) + 2).unwrap();
        let (a, b) = (vacuum_moment(&w, &small).unwrap(), vacuum_moment(&w, &large).unwrap());
        assert!((a - b).norm() <= 1e-14, "{w}: {a} vs {b}");
    }
}

/// Centered elements of the algebra generated by a single g_k.
const CENTERED: [&str; 4] = ["g{k}", "g{k}*", "g{k}* g{k}", "g{k} g{k}*"];

#[test]
fn distinct_generators_are_free() {
    let sys = CircularSystem::new(vec![2.0, 0.5, 1.0], 0.5, 4).unwrap();
    // Alternating products a_1 ⋯ a_m of centered a_i from the algebra of g_{k_i},
    // k_i ≠ k_{i+1}, total length ≤ 4, expanded over subsets.
    let mut checked = 0;
    let mut stack: Vec<Vec<(usize, String)>> = vec![vec![]];
    while let Some(prefix) = stack.pop() {
        let len: usize = prefix.iter().map(|(_, s)| word(s).g_len()).sum();
        if prefix.len() >= 2 {
            let m = prefix.len();
            let mut total = cplx(0.0, 0.0);
            for mask in 0..(1usize << m) {
                let mut coef = cplx(1.0, 0.0);
                let mut kept = Vec::new();
                for (i, (_, s)) in prefix.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        kept.push(s.clone());
                    } else {
                        coef *= -moment(s, &sys);
                    }
                }
                let w = if kept.is_empty() { cplx(1.0, 0.0) } else { moment(&kept.join(" "), &sys) };
                total += coef * w;
            }
            assert!(total.norm() <= 1e-12, "{prefix:?}: {total}");
            checked += 1;
        }
        for k in 1..=3 {
            if prefix.last().is_some_and(|(last, _)| *last == k) {
                continue;
            }
            for pattern in CENTERED {
                let s = pattern.replace("{k}", &k.to_string());
                if len + word(&s).g_len() <= 4 {
                    let mut next = prefix.clone();
                    next.push((k, s));
                    stack.push(next);
                }
            }
        }
    }
    assert!(checked > 100);
}

fn random_coeffs(r: &mut impl Rng, kk: usize, n: usize) -> Vec<ComplexMatrix> {
    (0..kk).map(|_| random_gaussian(r, n, n)).collect()
}

#[test]
fn khintchine_at_p_two_is_an_identity() {
    let mut r = rng(21);
    for _ in 0..30 {
        let kk = r.random_range(1..=4);
        let n = r.random_range(1..=3);
        let lambdas: Vec<f64> = (0..kk).map(|_| r.random_range(0.25..4.0)).collect();
        let sys = CircularSystem::new(lambdas, [0.0, 0.5, 1.0][r.random_range(0..3)], 2).unwrap();
        let xs = random_coeffs(&mut r, kk, n);
        let s = khintchine_sides(&xs, 2, &sys).unwrap();
        let hs: f64 = xs.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
        assert!((s.mid - s.lhs).abs() <= 1e-10);
        assert!(close(s.mid, hs, 1e-12));
        assert!(close(s.mid_operator_path, hs, 1e-12));
    }
}

#[test]
fn khintchine_at_p_four() {
    let mut r = rng(22);
    for _ in 0..15 {
        let kk = r.random_range(1..=3);
        let n = r.random_range(1..=3);
        let lambdas: Vec<f64> = (0..kk).map(|_| [0.5, 1.0, 2.0][r.random_range(0..3)]).collect();
        let sys = CircularSystem::new(lambdas, [0.0, 0.5, 1.0][r.random_range(0..3)], 4).unwrap();
        let xs = random_coeffs(&mut r, kk, n);
        let s = khintchine_sides(&xs, 4, &sys).unwrap();
        assert!(s.lhs <= s.mid + 1e-10, "{s:?}");
        assert!((s.mid - s.mid_operator_path).abs() <= 1e-10 * s.mid.max(1.0));
        assert!(s.mid / s.lhs <= 10.0);
        assert_eq!(s.rhs, s.lhs);
    }
}

#[test]
fn single_scalar_fourth_moment() {
    // mid⁴ = λ^{-2θ} ρ(g*g g*g) = λ^{2θ}(1 + λ^{-2}).
    for lam in [0.5, 1.0, 2.0, 3.0] {
        for theta in [0.0, 0.5, 1.0] {
            let sys = CircularSystem::new(vec![lam], theta, 4).unwrap();
            let s = khintchine_sides(&[diag(&[1.0])], 4, &sys).unwrap();
            let want = (lam.powf(2.0 * theta) * (1.0 + lam.powi(-2))).powf(0.25);
            assert!(close(s.mid, want, 1e-12), "λ={lam} θ={theta}: {} vs {want}", s.mid);
            assert!(close(s.mid_operator_path, want, 1e-12));
        }
    }
}

#[test]
fn balanced_system_is_symmetric_under_adjoints() {
    let mut r = rng(23);
    let sys = CircularSystem::new(vec![1.0, 1.0], 0.5, 4).unwrap();
    let xs = random_coeffs(&mut r, 2, 2);
    let ys: Vec<ComplexMatrix> = xs.iter().map(|x| x.adjoint()).collect();
    let (a, b) = (khintchine_sides(&xs, 4, &sys).unwrap(), khintchine_sides(&ys, 4, &sys).unwrap());
    assert!(close(a.mid, b.mid, 1e-12));
    assert!(close(a.column_term, b.row_term, 1e-12));
    assert!(close(a.row_term, b.column_term, 1e-12));
}

#[test]
fn khintchine_rejects_odd_exponents_and_shallow_truncation() {
    let sys = CircularSystem::new(vec![1.0], 0.5, 2).unwrap();
    let xs = [diag(&[1.0])];
    assert!(khintchine_sides(&xs, 3, &sys).is_err());
    assert!(khintchine_sides(&xs, 4, &sys).is_err());
}

#[test]
fn triangular_projection_examples() {
    let sys = CircularSystem::new(vec![0.5, 2.0], 0.5, 4).unwrap();
    let one = cplx(1.0, 0.0);
    assert_eq!(triangular_projection_check(&[(vec![-1], one)], &sys).unwrap(), 0.0);
    let r = triangular_projection_check(&[(vec![1], one), (vec![2], cplx(0.3, -0.7))], &sys).unwrap();
    assert!(close(r, 1.0, 1e-12), "{r}");
    assert!(triangular_projection_check(&[(vec![3], one)], &sys).is_err());
}

#[test]
fn triangular_projection_on_random_combinations() {
    let mut r = rng(24);
    let sys = CircularSystem::new(vec![0.5, 2.0], 0.5, 4).unwrap();
    let words: Vec<Vec<i32>> = {
        let letters = [-2, -1, 1, 2];
        let mut w = vec![vec![]];
        w.extend(letters.iter().map(|&a| vec![a]));
        w.extend(letters.iter().flat_map(|&a| letters.iter().map(move |&b| vec![a, b])));
        w
    };
    for _ in 0..10 {
        let coeffs: Vec<(Vec<i32>, C64)> = words
            .iter()
            .map(|w| (w.clone(), cplx(gauss(&mut r), gauss(&mut r))))
            .collect();
        let ratio = triangular_projection_check(&coeffs, &sys).unwrap();
        assert!(ratio <= 2.1, "{ratio}");
    }
}

fn gauss(r: &mut impl Rng) -> f64 {
    r.sample(rand_distr::StandardNormal)
}
