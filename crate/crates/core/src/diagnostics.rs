//! Empirical counterparts of the quantities the error analysis bounds: the
//! gradient at the truth, localized restricted eigenvalues, covariance
//! deviations, truncated tail sums and Markov-chain Bernstein tails.

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{AhrError, Result};
use crate::huber::{active_gram, check_tau, gradient_from_residuals, mean_of};
use crate::markov::covariates::weighted_gram;
use crate::markov::{ChainSampler, ChainSpec, CovariateMap, Dataset};
use crate::rng::{stream_rng, Component};

/// `||grad H_tau(beta*)||_inf`.
pub fn grad_supnorm_at_truth(ds: &Dataset, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let truth = ds.require_truth()?;
    let r = ds.problem.residuals(truth.beta_star())?;
    let g = gradient_from_residuals(&ds.problem, r.view(), tau);
    Ok(g.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Inputs of the high-probability bound on `||grad H_tau(beta*)||_inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientBoundInputs {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub tau: f64,
    pub delta: f64,
    /// `sqrt(E_pi M^4)`.
    pub sigma2: f64,
    /// Conditional `(1 + min(delta, 1))`-moment bound.
    pub v: f64,
    /// Unknown constant of the bias term; a calibration input.
    pub c: f64,
}

/// The three terms of the gradient bound, in printed order:
///
/// ```text
/// sqrt(A * 2 sigma2 v tau^(1 - delta') log d / n)
///   + A * 20 tau log d / n
///   + C tau^(-delta'),          A = (1 + gamma) / (1 - gamma)
/// ```
pub fn prop3_terms(inp: &GradientBoundInputs) -> Result<[f64; 3]> {
    check_tau(inp.tau)?;
    if inp.n == 0 || inp.d < 2 {
        return Err(AhrError::invalid("need n >= 1 and d >= 2"));
    }
    if !(0.0..1.0).contains(&inp.gamma) {
        return Err(AhrError::invalid("gamma must lie in [0, 1)"));
    }
    if !(inp.delta > 0.0) || !(inp.sigma2 >= 0.0) || !(inp.v >= 0.0) || !(inp.c >= 0.0) {
        return Err(AhrError::invalid("delta must be > 0; sigma2, v, C must be >= 0"));
    }
    let a = (1.0 + inp.gamma) / (1.0 - inp.gamma);
    let de = inp.delta.min(1.0);
    let log_d_n = (inp.d as f64).ln() / inp.n as f64;
    Ok([
        (a * 2.0 * inp.sigma2 * inp.v * inp.tau.powf(1.0 - de) * log_d_n).sqrt(),
        a * 20.0 * inp.tau * log_d_n,
        inp.c * inp.tau.powf(-de),
    ])
}

pub fn prop3_bound(inp: &GradientBoundInputs) -> Result<f64> {
    let [a, b, c] = prop3_terms(inp)?;
    Ok(a + b + c)
}

/// How candidate directions are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionMode {
    /// Coordinate directions on the support, plus random cone directions
    /// refined by projected descent.
    Sampled,
    /// Only the coordinate directions `e_j`, `j` in the support.
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LreQuery {
    /// l1 radius of the neighbourhood of `beta*`.
    pub r: f64,
    /// Directions satisfy `||u_{S^c}||_1 <= cone_constant * ||u_S||_1`.
    pub cone_constant: f64,
    pub num_directions: usize,
    pub num_centers: usize,
    pub refine_steps: usize,
    pub mode: DirectionMode,
    /// Radius of the pool that centers are drawn from; centers outside
    /// `r` are discarded. Defaults to `r`. A fixed pool makes the estimate
    /// monotone in `r`.
    pub pool_radius: Option<f64>,
    pub seed: u64,
}

impl LreQuery {
    pub fn new(r: f64) -> Self {
        LreQuery {
            r,
            cone_constant: 3.0,
            num_directions: 1000,
            num_centers: 10,
            refine_steps: 10,
            mode: DirectionMode::Sampled,
            pool_radius: None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(AhrError::invalid("LRE radius must be positive and finite"));
        }
        if !(self.cone_constant >= 1.0) {
            return Err(AhrError::invalid("cone constant must be >= 1"));
        }
        if self.num_centers == 0 {
            return Err(AhrError::invalid("need at least one center"));
        }
        if let Some(p) = self.pool_radius {
            if !(p > 0.0 && p.is_finite()) {
                return Err(AhrError::invalid("pool radius must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Shrinks the off-support block so that `||u_{S^c}||_1 <= c ||u_S||_1`.
/// Leaves cone members unchanged.
pub(crate) fn into_cone(u: &mut Array1<f64>, in_support: &[bool], c: f64) {
    let on: f64 = u.iter().zip(in_support).filter(|(_, &s)| s).map(|(v, _)| v.abs()).sum();
    let mut off: Vec<f64> = u
        .iter()
        .zip(in_support)
        .filter(|(_, &s)| !s)
        .map(|(v, _)| v.abs())
        .collect();
    let budget = c * on;
    if off.iter().sum::<f64>() <= budget {
        return;
    }
    // soft threshold level that brings the off-support l1 mass to `budget`
    off.sort_by(|a, b| b.total_cmp(a));
    let mut theta = 0.0;
    let mut acc = 0.0;
    for (k, &v) in off.iter().enumerate() {
        acc += v;
        let t = (acc - budget) / (k + 1) as f64;
        let next = off.get(k + 1).copied().unwrap_or(0.0);
        if t >= next {
            theta = t;
            break;
        }
    }
    for (v, &s) in u.iter_mut().zip(in_support) {
        if !s {
            *v = v.signum() * (v.abs() - theta).max(0.0);
        }
    }
}

fn normalize(u: &mut Array1<f64>) -> bool {
    let norm = u.dot(u).sqrt();
    if norm > 0.0 && norm.is_finite() {
        u.mapv_inplace(|v| v / norm);
        true
    } else {
        false
    }
}

fn random_direction(
    d: usize,
    support: &[usize],
    in_support: &[bool],
    cone: f64,
    rng: &mut impl Rng,
) -> Array1<f64> {
    let k = rng.random_range(1..=d);
    let mut u = Array1::zeros(d);
    for j in sample(rng, d, k) {
        u[j] = rng.random::<f64>() * if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    if support.iter().all(|&j| u[j] == 0.0) {
        let j = support[rng.random_range(0..support.len())];
        u[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    into_cone(&mut u, in_support, cone);
    u
}

/// Sampled upper bound on
/// `inf { u' Hess H_tau(beta) u : ||u||_2 = 1, u in cone, ||beta - beta*||_1 <= r }`.
///
/// The infimum itself is intractable; this returns the smallest curvature
/// found over the sampled centers and directions, which can only be larger
/// than the true infimum.
pub fn lre_estimate(ds: &Dataset, tau: f64, query: &LreQuery) -> Result<f64> {
    check_tau(tau)?;
    query.validate()?;
    let truth = ds.require_truth()?;
    let support = truth.support();
    if support.is_empty() {
        return Err(AhrError::invalid("LRE needs a non-empty support"));
    }
    let d = ds.d();
    let mut in_support = vec![false; d];
    for &j in support {
        in_support[j] = true;
    }
    let beta_star = truth.beta_star();

    let mut center_rng = stream_rng(query.seed, Component::Diagnostics, 0);
    let pool = query.pool_radius.unwrap_or(query.r);
    let mut centers = vec![beta_star.to_owned()];
    for _ in 1..query.num_centers {
        let mut v = Array1::from_shape_simple_fn(d, || center_rng.sample::<f64, _>(StandardNormal));
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        let radius = pool * (1.0 - center_rng.random::<f64>());
        v.mapv_inplace(|x| x / l1 * radius);
        if radius <= query.r {
            centers.push(&beta_star + &v);
        }
    }

    let mut best = f64::INFINITY;
    for center in &centers {
        let r = ds.problem.residuals(center.view())?;
        let h = active_gram(&ds.problem, r.view(), tau);
        let curvature = |u: &Array1<f64>| u.dot(&h.dot(u));
        for &j in support {
            best = best.min(h[[j, j]]);
        }
        if query.mode == DirectionMode::Coordinate {
            continue;
        }
        // same direction stream at every center
        let mut rng = stream_rng(query.seed, Component::Directions, 0);
        let step = 0.5 / h.diag().sum().max(f64::MIN_POSITIVE);
        for _ in 0..query.num_directions {
            let mut u = random_direction(d, support, &in_support, query.cone_constant, &mut rng);
            if !normalize(&mut u) {
                continue;
            }
            best = best.min(curvature(&u));
            for _ in 0..query.refine_steps {
                let hu = h.dot(&u);
                let mut next = &u - &(hu * (2.0 * step));
                into_cone(&mut next, &in_support, query.cone_constant);
                if !normalize(&mut next) {
                    break;
                }
                u = next;
                best = best.min(curvature(&u));
            }
        }
    }
    Ok(best.max(0.0))
}

fn state_counts(z: &[usize], m: usize) -> Result<Array1<f64>> {
    let mut counts = Array1::zeros(m);
    for &s in z {
        if s >= m {
            return Err(AhrError::invalid(format!("state {s} out of range for m = {m}")));
        }
        counts[s] += 1.0;
    }
    Ok(counts)
}

/// `max_{j,k} |(1/n) sum_i x_ij x_ik - Sigma[j,k]|` with
/// `Sigma = sum_a pi_a f(a) f(a)'`.
///
/// Uses the state counts of `Z`: the rows of a generated dataset are exactly
/// `f(Z_i)`, so `(1/n) X'X = sum_a (count_a / n) f(a) f(a)'`.
pub fn covariance_deviation(ds: &Dataset, cov: &CovariateMap, chain: &ChainSpec) -> Result<f64> {
    if cov.is_time_varying() {
        return Err(AhrError::invalid(
            "covariance deviation needs a time-invariant covariate map",
        ));
    }
    if cov.m() != chain.m() || cov.d() != ds.d() {
        return Err(AhrError::invalid("covariate map does not match the dataset/chain"));
    }
    let n = ds.n() as f64;
    let freq = state_counts(&ds.z, chain.m())? / n;
    let diff = &freq - &chain.stationary();
    let dev = weighted_gram(cov.tables()[0].view(), diff.view());
    Ok(dev.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// `(1/n) sum_i M(Z_i)^2 1{|eps_i| > tau / 2}`.
pub fn truncated_tail_sum(ds: &Dataset, cov: &CovariateMap, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let eps = ds.require_eps()?;
    let env = cov.envelope();
    if let Some(&bad) = ds.z.iter().find(|&&s| s >= env.len()) {
        return Err(AhrError::invalid(format!("state {bad} out of range")));
    }
    Ok(mean_of(
        ds.z.iter()
            .zip(eps.iter())
            .filter(|(_, e)| e.abs() > tau / 2.0)
            .map(|(&s, _)| env[s] * env[s]),
        ds.n(),
    ))
}

/// Leading term `sigma2 (2 / tau)^{1+delta} v_delta` of the bound on
/// [`truncated_tail_sum`].
pub fn truncated_tail_bound(sigma2: f64, tau: f64, delta: f64, v_delta: f64) -> f64 {
    sigma2 * (2.0 / tau).powf(1.0 + delta) * v_delta
}

/// `2 exp(-n eps^2 / ((1 + gamma) / (1 - gamma) * variance + 10 t eps))`,
/// capped at 1.
pub fn bernstein_bound(n: usize, gamma: f64, variance: f64, t: f64, eps: f64) -> f64 {
    let a = (1.0 + gamma) / (1.0 - gamma);
    let n = n as f64;
    (2.0 * (-n * eps * eps / (a * variance + 10.0 * t * eps)).exp()).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub epsilon_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub bernstein_bound: Vec<f64>,
    /// Binomial standard error `sqrt(p (1 - p) / replicas)` of each
    /// empirical tail.
    pub std_error: Vec<f64>,
    /// Grid points where the empirical tail exceeds the bound by more than
    /// three standard errors.
    pub flagged: Vec<bool>,
    pub replicas: usize,
    pub n: usize,
    pub gamma: f64,
}

impl ConcentrationReport {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

/// Monte Carlo tail of `|(1/n) sum_i f(Z_i) - E_pi f|` against the Markov
/// Bernstein bound with `V = Var_pi(f)` and `t = bound`.
///
/// Replica `k` draws its path from the diagnostics stream `(seed, k)`.
pub fn bernstein_check(
    chain: &ChainSpec,
    f: ArrayView1<'_, f64>,
    bound: f64,
    n: usize,
    replicas: usize,
    epsilon_grid: &[f64],
    seed: u64,
) -> Result<ConcentrationReport> {
    if f.len() != chain.m() {
        return Err(AhrError::invalid("state function must have one value per state"));
    }
    if !(bound.is_finite() && bound > 0.0) || f.iter().any(|v| !(v.abs() <= bound)) {
        return Err(AhrError::invalid(format!(
            "state function is not bounded by {bound}"
        )));
    }
    if n == 0 || replicas == 0 {
        return Err(AhrError::invalid("need n >= 1 and replicas >= 1"));
    }
    if epsilon_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(AhrError::invalid("epsilon grid must be positive"));
    }
    let pi = chain.stationary();
    let mean = pi.dot(&f);
    let variance = pi.iter().zip(f.iter()).map(|(p, v)| p * (v - mean).powi(2)).sum::<f64>();

    let sampler = ChainSampler::new(chain);
    let mut exceed = vec![0usize; epsilon_grid.len()];
    for k in 0..replicas {
        let mut rng = stream_rng(seed, Component::Diagnostics, k as u64);
        let z = sampler.sample(n, &mut rng);
        let avg = z.iter().map(|&s| f[s]).sum::<f64>() / n as f64;
        let dev = (avg - mean).abs();
        for (e, c) in epsilon_grid.iter().zip(exceed.iter_mut()) {
            if dev > *e {
                *c += 1;
            }
        }
    }

    let reps = replicas as f64;
    let empirical: Vec<f64> = exceed.iter().map(|&c| c as f64 / reps).collect();
    let bounds: Vec<f64> = epsilon_grid
        .iter()
        .map(|&e| bernstein_bound(n, chain.gamma(), variance, bound, e))
        .collect();
    let se: Vec<f64> = empirical.iter().map(|p| (p * (1.0 - p) / reps).sqrt()).collect();
    let flagged = empirical
        .iter()
        .zip(&bounds)
        .zip(&se)
        .map(|((p, b), s)| p - b > 3.0 * s)
        .collect();
    Ok(ConcentrationReport {
        epsilon_grid: epsilon_grid.to_vec(),
        empirical_tail: empirical,
        bernstein_bound: bounds,
        std_error: se,
        flagged,
        replicas,
        n,
        gamma: chain.gamma(),
    })
}
