//! Independent reference computations used only by tests.
//!
//! Nothing here calls the solver; the objective is re-evaluated through
//! `loss_value` alone so that the oracles share no code path with the
//! proximal gradient iteration.

#![allow(dead_code)]

use ahr_core::huber::{loss_value, Problem};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

pub fn objective(problem: &Problem, beta: ArrayView1<'_, f64>, tau: f64, lambda: f64) -> f64 {
    loss_value(beta, problem, tau).unwrap() + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Central differences of `loss_value`.
pub fn finite_difference_gradient(problem: &Problem, beta: ArrayView1<'_, f64>, tau: f64, h: f64) -> Array1<f64> {
    let mut g = Array1::zeros(beta.len());
    for j in 0..beta.len() {
        let mut up = beta.to_owned();
        let mut down = beta.to_owned();
        up[j] += h;
        down[j] -= h;
        g[j] = (loss_value(up.view(), problem, tau).unwrap() - loss_value(down.view(), problem, tau).unwrap())
            / (2.0 * h);
    }
    g
}

fn clamp(w: f64, tau: f64) -> f64 {
    w.clamp(-tau, tau)
}

/// Exact minimizer over one coordinate `b` of
/// `(1/n) sum_i h_tau(r_i - a_i b) + lambda |b|`.
///
/// `psi(b) = -(1/n) sum_i a_i T_tau(r_i - a_i b)` is nondecreasing and
/// piecewise linear with breakpoints where `r_i - a_i b = +-tau`; the root
/// of `psi(b) = target` is located between breakpoints by bisection and
/// solved exactly on that linear piece.
pub fn coordinate_minimizer(a: &[f64], r: &[f64], tau: f64, lambda: f64) -> f64 {
    let n = a.len() as f64;
    let psi = |b: f64| -> f64 { -a.iter().zip(r).map(|(ai, ri)| ai * clamp(ri - ai * b, tau)).sum::<f64>() / n };
    if a.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let at_zero = psi(0.0);
    if at_zero.abs() <= lambda {
        return 0.0;
    }
    let target = if at_zero < -lambda { -lambda } else { lambda };

    let mut bps: Vec<f64> = Vec::new();
    if tau.is_finite() {
        for (ai, ri) in a.iter().zip(r) {
            if *ai != 0.0 {
                bps.push((ri - tau) / ai);
                bps.push((ri + tau) / ai);
            }
        }
    }
    bps.sort_by(|x, y| x.total_cmp(y));
    // interval [lo, hi] of consecutive breakpoints containing the root
    let k = bps.partition_point(|&b| psi(b) < target);
    let lo = if k == 0 { f64::NEG_INFINITY } else { bps[k - 1] };
    let hi = if k == bps.len() { f64::INFINITY } else { bps[k] };
    let mid = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    };
    // on this piece: psi(b) = c0 + c1 * b
    let mut c0 = 0.0;
    let mut c1 = 0.0;
    for (ai, ri) in a.iter().zip(r) {
        let w = ri - ai * mid;
        if w.abs() <= tau {
            c0 -= ai * ri;
            c1 += ai * ai;
        } else {
            c0 -= ai * tau * w.signum();
        }
    }
    c0 /= n;
    c1 /= n;
    let b = if c1 > 0.0 { (target - c0) / c1 } else { mid };
    b.clamp(lo, hi)
}

/// Cyclic coordinate descent with exact coordinate minimization.
pub fn coordinate_descent(problem: &Problem, tau: f64, lambda: f64, max_sweeps: usize) -> Array1<f64> {
    let (n, d) = (problem.n(), problem.d());
    let x = problem.x();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.column(j).to_vec()).collect();
    let mut beta = Array1::<f64>::zeros(d);
    let mut resid: Vec<f64> = problem.y().to_vec();
    let mut last = objective(problem, beta.view(), tau, lambda);
    let mut stalled = 0;
    for _ in 0..max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..d {
            let old = beta[j];
            let partial: Vec<f64> = (0..n).map(|i| resid[i] + cols[j][i] * old).collect();
            let new = coordinate_minimizer(&cols[j], &partial, tau, lambda);
            if new != old {
                for i in 0..n {
                    resid[i] = partial[i] - cols[j][i] * new;
                }
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        let obj = objective(problem, beta.view(), tau, lambda);
        if max_change < 1e-15 || obj >= last {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        } else {
            stalled = 0;
        }
        last = obj;
    }
    beta
}

/// Minimum of the penalized objective over the grid `lo:step:hi` in each
/// of `d <= 2` coordinates.
pub fn grid_search(problem: &Problem, tau: f64, lambda: f64, lo: f64, hi: f64, step: f64) -> (f64, Array1<f64>) {
    let d = problem.d();
    assert!(d <= 2, "grid search is exhaustive; keep d <= 2");
    let steps = ((hi - lo) / step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * step).collect();
    let n = problem.n() as f64;
    let x = problem.x();
    let y = problem.y();
    let h = |w: f64| {
        let a = w.abs();
        if a <= tau {
            0.5 * w * w
        } else {
            tau * a - 0.5 * tau * tau
        }
    };
    let mut best = (f64::INFINITY, Array1::zeros(d));
    if d == 1 {
        for &b in &grid {
            let v = y.iter().zip(x.column(0)).map(|(yi, xi)| h(yi - xi * b)).sum::<f64>() / n + lambda * b.abs();
            if v < best.0 {
                best = (v, Array1::from(vec![b]));
            }
        }
        return best;
    }
    let mut partial = vec![0.0; problem.n()];
    for &b1 in &grid {
        for (i, p) in partial.iter_mut().enumerate() {
            *p = y[i] - x[[i, 0]] * b1;
        }
        let pen1 = lambda * b1.abs();
        for &b2 in &grid {
            let mut v = 0.0;
            for (i, p) in partial.iter().enumerate() {
                v += h(p - x[[i, 1]] * b2);
            }
            let v = v / n + pen1 + lambda * b2.abs();
            if v < best.0 {
                best = (v, Array1::from(vec![b1, b2]));
            }
        }
    }
    best
}

/// Gaussian design, sparse truth, Student-t(2.5) noise so that clipping is
/// active at moderate tau.
pub fn random_problem(rng: &mut impl Rng, n: usize, d: usize) -> (Problem, Array1<f64>) {
    let x = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    let mut beta = Array1::zeros(d);
    let s = (d / 3).max(1);
    for j in 0..s {
        beta[j] = rng.random_range(-2.0..2.0);
    }
    let t = StudentT::new(2.5).unwrap();
    let noise = Array1::from_shape_simple_fn(n, || t.sample(rng));
    let y = x.dot(&beta) + noise;
    (Problem::new(x, y).unwrap(), beta)
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// `E|X|^p` for a symmetric density known up to a constant, by quadrature
/// of `int_0^inf x^p g(x) dx / int_0^inf g(x) dx` after `x = u / (1 - u)`.
pub fn abs_moment_quadrature(g: &dyn Fn(f64) -> f64, p: f64) -> f64 {
    let mapped = |h: &dyn Fn(f64) -> f64, u: f64| -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let x = u / (1.0 - u);
        h(x) / ((1.0 - u) * (1.0 - u))
    };
    let num = integrate(&|u| mapped(&|x| x.powf(p) * g(x), u), 0.0, 1.0, 1e-13);
    let den = integrate(&|u| mapped(g, u), 0.0, 1.0, 1e-13);
    num / den
}
