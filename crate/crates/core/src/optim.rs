//! Derivative-free optimizers used for the small nonsmooth problems here
//! (state searches, ratio maximizations). Dimensions are tiny, so simple
//! robust methods beat anything clever.

use rand::Rng;
use rand_distr::StandardNormal;

/// Nelder–Mead minimization with adaptive coefficients.
/// Non-finite objective values are treated as +∞.
pub fn nelder_mead<F>(f: &mut F, x0: &[f64], step: f64, max_evals: usize, ftol: f64) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };
    if n == 0 {
        let v = eval(x0);
        return (Vec::new(), v);
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { step * x[i].abs().max(1.0) } else { step };
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut evals = n + 1;

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= ftol * (best.abs() + ftol) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in simplex.iter().take(n) {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha, &simplex[n].0);
        let fr = eval(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(gamma, &simplex[n].0);
            let fe = eval(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(alpha * rho, &simplex[n].0);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho, &simplex[n].0);
                let fc = eval(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x_best.iter().zip(&item.0).map(|(b, w)| b + sigma * (w - b)).collect();
                    let v = eval(&x);
                    *item = (x, v);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v)
}

/// Repeated Nelder–Mead from the current best point with shrinking steps;
/// restarting defeats most premature simplex collapses.
pub fn nelder_mead_polish<F>(f: &mut F, x0: &[f64], step: f64, rounds: usize, evals_per_round: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best_x = x0.to_vec();
    let mut best_v = f(x0);
    if !best_v.is_finite() {
        best_v = f64::INFINITY;
    }
    let mut s = step;
    for _ in 0..rounds {
        let (x, v) = nelder_mead(f, &best_x, s, evals_per_round, 1e-15);
        if v < best_v {
            best_x = x;
            best_v = v;
        }
        s *= 0.3;
    }
    (best_x, best_v)
}

/// (1+1) evolution strategy with the one-fifth success rule; maximizes `f`.
pub fn es_maximize<F, R>(f: &mut F, x0: &[f64], sigma0: f64, iters: usize, rng: &mut R) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        fx = f64::NEG_INFINITY;
    }
    let mut sigma = sigma0;
    let up = 1.5f64;
    let down = up.powf(-0.25);
    for _ in 0..iters {
        let y: Vec<f64> = x.iter().map(|xi| xi + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let fy = f(&y);
        if fy.is_finite() && fy >= fx {
            x = y;
            fx = fy;
            sigma *= up;
        } else {
            sigma *= down;
        }
        if sigma < 1e-12 {
            break;
        }
    }
    (x, fx)
}

/// Maximizes a function of a positive scalar over [exp(lo), exp(hi)]:
/// a uniform scan in log-scale followed by golden-section refinement of the
/// best bracket.
pub fn maximize_log_scalar<F>(f: &mut F, lo: f64, hi: f64, scan: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let scan = scan.max(3);
    let h = (hi - lo) / (scan - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..scan {
        let v = f((lo + h * i as f64).exp());
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + h * (best_i as f64 - 1.0).max(0.0);
    let mut b = lo + h * ((best_i + 1).min(scan - 1) as f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(d.exp());
    for _ in 0..80 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d.exp());
        }
    }
    let (arg, v) = if fc > fd { (c, fc) } else { (d, fd) };
    if v >= best_v {
        (arg.exp(), v)
    } else {
        ((lo + h * best_i as f64).exp(), best_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let (x, v) = nelder_mead(&mut f, &[0.0, 0.0], 0.5, 2000, 1e-14);
        assert!(v < 1e-10);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn nelder_mead_handles_nonsmooth_max() {
        let mut f = |x: &[f64]| (x[0] - 0.3).abs().max((x[1] + 0.1).abs());
        let (_, v) = nelder_mead_polish(&mut f, &[2.0, 2.0], 1.0, 4, 2000);
        assert!(v < 1e-6, "{v}");
    }

    #[test]
    fn es_climbs_concave_bump() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut f = |x: &[f64]| -(x[0] - 2.0).powi(2) - (x[1] - 1.0).powi(2);
        let (_, v) = es_maximize(&mut f, &[0.0, 0.0], 1.0, 3000, &mut rng);
        assert!(v > -1e-8);
    }

    #[test]
    fn log_scalar_max_of_unimodal() {
        let mut f = |s: f64| -(s.ln() - 1.5).powi(2);
        let (arg, v) = maximize_log_scalar(&mut f, -10.0, 10.0, 41);
        assert!((arg.ln() - 1.5).abs() < 1e-6 && v > -1e-11);
    }
}
