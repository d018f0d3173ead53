//! Finite reversible Markov chains with an exactly computed spectral gap.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{AhrError, Result};
use crate::rng::{stream_rng, Component};

const ROW_SUM_TOL: f64 = 1e-12;
const BALANCE_TOL: f64 = 1e-10;

/// A stationary, reversible chain on states `0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    p: Array2<f64>,
    pi: Array1<f64>,
    gamma: f64,
}

impl ChainSpec {
    /// Validates `p`, solves for its stationary law and computes `gamma`.
    pub fn new(p: Array2<f64>) -> Result<Self> {
        let pi = stationary_distribution(p.view())?;
        check_detailed_balance(p.view(), pi.view())?;
        let gamma = gamma_of(p.view(), pi.view());
        if gamma >= 1.0 - 1e-12 {
            return Err(AhrError::InvalidChain(format!(
                "chain has no spectral gap (gamma = {gamma})"
            )));
        }
        Ok(ChainSpec { p, pi, gamma })
    }

    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn transition(&self) -> ArrayView2<'_, f64> {
        self.p.view()
    }

    pub fn stationary(&self) -> ArrayView1<'_, f64> {
        self.pi.view()
    }

    /// Norm of the transition operator on `pi`-mean-zero functions.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn check_stochastic(p: ArrayView2<'_, f64>) -> Result<()> {
    let (m, k) = p.dim();
    if m == 0 || m != k {
        return Err(AhrError::InvalidChain(format!(
            "transition matrix must be square and non-empty, got {m}x{k}"
        )));
    }
    for (a, row) in p.rows().into_iter().enumerate() {
        if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(AhrError::InvalidChain(format!("row {a} has a negative or non-finite entry")));
        }
        let s: f64 = row.sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(AhrError::InvalidChain(format!("row {a} sums to {s}")));
        }
    }
    Ok(())
}

fn reaches_all(p: ArrayView2<'_, f64>, transpose: bool) -> bool {
    let m = p.nrows();
    let mut seen = vec![false; m];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for b in 0..m {
            let w = if transpose { p[[b, a]] } else { p[[a, b]] };
            if w > 0.0 && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Unique invariant law of an irreducible row-stochastic matrix.
pub fn stationary_distribution(p: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    check_stochastic(p)?;
    let m = p.nrows();
    if !reaches_all(p, false) || !reaches_all(p, true) {
        return Err(AhrError::InvalidChain("transition matrix is reducible".into()));
    }
    if m == 1 {
        return Ok(Array1::ones(1));
    }
    // (P' - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = p[[j, i]] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m);
    rhs[m - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| AhrError::InvalidChain("stationary system is singular".into()))?;
    let mut pi = Array1::from_iter(sol.iter().copied());
    // One power step removes most of the solve's rounding; renormalize after.
    pi = pi.dot(&p);
    let total = pi.sum();
    pi.mapv_inplace(|v| v / total);
    if pi.iter().any(|&v| !(v > 0.0)) {
        return Err(AhrError::InvalidChain("stationary law is not strictly positive".into()));
    }
    Ok(pi)
}

fn check_detailed_balance(p: ArrayView2<'_, f64>, pi: ArrayView1<'_, f64>) -> Result<()> {
    let m = pi.len();
    for a in 0..m {
        for b in (a + 1)..m {
            let gap = (pi[a] * p[[a, b]] - pi[b] * p[[b, a]]).abs();
            if gap > BALANCE_TOL {
                return Err(AhrError::UnsupportedChain(format!(
                    "detailed balance fails between states {a} and {b} (gap {gap:.3e}); \
                     only reversible chains are supported"
                )));
            }
        }
    }
    Ok(())
}

/// Largest absolute eigenvalue of `D^{1/2} P D^{-1/2}` after removing the
/// leading eigenpair `(1, sqrt(pi))`. Assumes detailed balance.
fn gamma_of(p: ArrayView2<'_, f64>, pi: ArrayView1<'_, f64>) -> f64 {
    let m = pi.len();
    if m == 1 {
        return 0.0;
    }
    let root: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let fwd = root[a] * p[[a, b]] / root[b];
            let bwd = root[b] * p[[b, a]] / root[a];
            s[(a, b)] = 0.5 * (fwd + bwd) - root[a] * root[b];
        }
    }
    let eig = SymmetricEigen::new(s);
    eig.eigenvalues.iter().fold(0.0, |g, v| g.max(v.abs()))
}

/// Recomputes `gamma` for `spec` from its transition matrix.
pub fn spectral_gamma(spec: &ChainSpec) -> Result<f64> {
    check_detailed_balance(spec.p.view(), spec.pi.view())?;
    Ok(gamma_of(spec.p.view(), spec.pi.view()))
}

/// `P = (1 - gamma) 1 pi' + gamma I`: a lazy version of the i.i.d. chain
/// whose operator norm on mean-zero functions is exactly `gamma`.
pub fn make_chain_with_gamma_pi(pi: ArrayView1<'_, f64>, target_gamma: f64) -> Result<ChainSpec> {
    if !(0.0..1.0).contains(&target_gamma) {
        return Err(AhrError::invalid(format!(
            "target gamma must lie in [0, 1), got {target_gamma}"
        )));
    }
    let m = pi.len();
    if m == 0 || pi.iter().any(|&v| !(v > 0.0)) || (pi.sum() - 1.0).abs() > ROW_SUM_TOL {
        return Err(AhrError::invalid("pi must be a strictly positive probability vector"));
    }
    let mut p = Array2::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            p[[a, b]] = (1.0 - target_gamma) * pi[b] + if a == b { target_gamma } else { 0.0 };
        }
    }
    // Both eigenvalues are known in closed form; m may be large.
    let gamma = if m == 1 { 0.0 } else { target_gamma };
    Ok(ChainSpec {
        p,
        pi: pi.to_owned(),
        gamma,
    })
}

/// [`make_chain_with_gamma_pi`] with the uniform stationary law.
pub fn make_chain_with_gamma(m: usize, target_gamma: f64) -> Result<ChainSpec> {
    if m == 0 {
        return Err(AhrError::invalid("state count must be >= 1"));
    }
    make_chain_with_gamma_pi(Array1::from_elem(m, 1.0 / m as f64).view(), target_gamma)
}

/// Inverse-CDF sampler over the rows of a chain.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    initial: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Rounding may leave the total slightly below 1; the last state with
    // positive weight absorbs the remainder.
    let mut last = out.len() - 1;
    while last > 0 && out[last] == out[last - 1] {
        last -= 1;
    }
    out[last] = f64::INFINITY;
    out.truncate(last + 1);
    out
}

fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u)
}

impl ChainSampler {
    pub fn new(spec: &ChainSpec) -> Self {
        ChainSampler {
            initial: cumulative(spec.pi.iter().copied()),
            rows: spec
                .p
                .rows()
                .into_iter()
                .map(|r| cumulative(r.iter().copied()))
                .collect(),
        }
    }

    /// Stationary path of length `n`.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut z = Vec::with_capacity(n);
        if n == 0 {
            return z;
        }
        if self.rows.len() == 1 {
            z.resize(n, 0);
            return z;
        }
        let mut state = draw(&self.initial, rng);
        z.push(state);
        for _ in 1..n {
            state = draw(&self.rows[state], rng);
            z.push(state);
        }
        z
    }
}

/// Stationary path of length `n` drawn from the chain stream of `seed`.
pub fn simulate_chain(spec: &ChainSpec, n: usize, seed: u64) -> Vec<usize> {
    simulate_chain_replicate(spec, n, seed, 0)
}

pub fn simulate_chain_replicate(spec: &ChainSpec, n: usize, seed: u64, replicate: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, Component::Chain, replicate);
    ChainSampler::new(spec).sample(n, &mut rng)
}
