//! Huber loss, its derivative (the truncation operator) and the empirical
//! objective `H_tau(beta) = (1/n) sum_i h_tau(y_i - x_i' beta)`.
//!
//! `tau = f64::INFINITY` is a valid robustification parameter and reduces
//! every routine here to its squared-loss counterpart.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{AhrError, Result};

/// Sample sizes at or above this use compensated summation.
pub const COMPENSATED_MIN_N: usize = 10_000;

/// Robustification parameter and l1 penalty of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberConfig {
    pub tau: f64,
    pub lambda: f64,
}

impl HuberConfig {
    pub fn new(tau: f64, lambda: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(AhrError::invalid(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(HuberConfig { tau, lambda })
    }

    /// The lasso: squared loss with an l1 penalty.
    pub fn least_squares(lambda: f64) -> Result<Self> {
        HuberConfig::new(f64::INFINITY, lambda)
    }

    pub fn is_least_squares(&self) -> bool {
        self.tau == f64::INFINITY
    }
}

/// A regression problem `y = X beta + eps` with `X` of shape `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    x: Array2<f64>,
    y: Array1<f64>,
}

impl Problem {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 || d == 0 {
            return Err(AhrError::invalid(format!(
                "design must be non-empty, got {n}x{d}"
            )));
        }
        if y.len() != n {
            return Err(AhrError::invalid(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(AhrError::invalid("design and response must be finite"));
        }
        Ok(Problem { x, y })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>) {
        (self.x, self.y)
    }

    /// `y - X beta`, touching only the non-zero columns of `beta`.
    pub fn residuals(&self, beta: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(beta.len(), "beta")?;
        Ok(self.residuals_unchecked(beta))
    }

    pub(crate) fn residuals_unchecked(&self, beta: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut r = self.y.clone();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                r.scaled_add(-b, &self.x.column(j));
            }
        }
        r
    }

    pub(crate) fn check_dim(&self, len: usize, what: &str) -> Result<()> {
        if len != self.d() {
            return Err(AhrError::invalid(format!(
                "{what} has length {len}, expected d = {}",
                self.d()
            )));
        }
        Ok(())
    }
}

/// Ground truth coefficients and their support.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    beta_star: Array1<f64>,
    support: Vec<usize>,
}

impl TruthSpec {
    pub fn new(beta_star: Array1<f64>) -> Result<Self> {
        if beta_star.is_empty() || beta_star.iter().any(|v| !v.is_finite()) {
            return Err(AhrError::invalid("beta_star must be non-empty and finite"));
        }
        let support = beta_star
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(TruthSpec { beta_star, support })
    }

    pub fn beta_star(&self) -> ArrayView1<'_, f64> {
        self.beta_star.view()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn d(&self) -> usize {
        self.beta_star.len()
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(AhrError::invalid(format!("tau must be > 0, got {tau}")))
    }
}

fn check_finite(w: f64) -> Result<()> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(AhrError::invalid(format!("argument must be finite, got {w}")))
    }
}

#[inline]
pub(crate) fn huber_unchecked(w: f64, tau: f64) -> f64 {
    let a = w.abs();
    if a <= tau {
        0.5 * w * w
    } else {
        tau * a - 0.5 * tau * tau
    }
}

#[inline]
pub(crate) fn clamp_unchecked(w: f64, t: f64) -> f64 {
    w.clamp(-t, t)
}

/// Huber loss `h_tau(w)`: quadratic on `[-tau, tau]`, linear outside.
pub fn huber_value(w: f64, tau: f64) -> Result<f64> {
    check_finite(w)?;
    check_tau(tau)?;
    Ok(huber_unchecked(w, tau))
}

/// Truncation operator: clamps `w` to `[-t, t]`.
pub fn truncate(w: f64, t: f64) -> Result<f64> {
    check_finite(w)?;
    check_tau(t)?;
    Ok(clamp_unchecked(w, t))
}

/// First derivative of the Huber loss. At the kink `|w| = tau` this is the
/// (continuous) clamp value.
pub fn huber_deriv(w: f64, tau: f64) -> Result<f64> {
    truncate(w, tau)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub(crate) fn mean_of<I: IntoIterator<Item = f64>>(values: I, n: usize) -> f64 {
    if n >= COMPENSATED_MIN_N {
        compensated_sum(values) / n as f64
    } else {
        values.into_iter().sum::<f64>() / n as f64
    }
}

/// `H_tau` evaluated from precomputed residuals.
pub(crate) fn loss_from_residuals(r: ArrayView1<'_, f64>, tau: f64) -> f64 {
    mean_of(r.iter().map(|&w| huber_unchecked(w, tau)), r.len())
}

/// `grad H_tau = -(1/n) X' T_tau(r)` from precomputed residuals.
pub(crate) fn gradient_from_residuals(
    problem: &Problem,
    r: ArrayView1<'_, f64>,
    tau: f64,
) -> Array1<f64> {
    let n = problem.n();
    let clipped = r.mapv(|w| clamp_unchecked(w, tau));
    if n >= COMPENSATED_MIN_N {
        let x = problem.x();
        Array1::from_iter(x.axis_iter(Axis(1)).map(|col| {
            -compensated_sum(col.iter().zip(clipped.iter()).map(|(a, b)| a * b)) / n as f64
        }))
    } else {
        let mut g = problem.x().t().dot(&clipped);
        g.mapv_inplace(|v| -v / n as f64);
        g
    }
}

/// Empirical Huber objective `H_tau(beta)`.
pub fn loss_value(beta: ArrayView1<'_, f64>, problem: &Problem, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let r = problem.residuals(beta)?;
    Ok(loss_from_residuals(r.view(), tau))
}

/// Gradient of `H_tau` at `beta`.
pub fn loss_gradient(
    beta: ArrayView1<'_, f64>,
    problem: &Problem,
    tau: f64,
) -> Result<Array1<f64>> {
    check_tau(tau)?;
    let r = problem.residuals(beta)?;
    Ok(gradient_from_residuals(problem, r.view(), tau))
}

/// `(1/n) sum_i (x_i' u)^2 1{|y_i - x_i' beta| <= tau}`, the curvature of
/// `H_tau` at `beta` along `u`.
pub fn hessian_quadratic_form(
    beta: ArrayView1<'_, f64>,
    problem: &Problem,
    tau: f64,
    u: ArrayView1<'_, f64>,
) -> Result<f64> {
    check_tau(tau)?;
    problem.check_dim(u.len(), "u")?;
    let r = problem.residuals(beta)?;
    let xu = problem.x().dot(&u);
    Ok(mean_of(
        r.iter()
            .zip(xu.iter())
            .filter(|(w, _)| w.abs() <= tau)
            .map(|(_, v)| v * v),
        problem.n(),
    ))
}

/// `(1/n) sum_{i : |r_i| <= tau} x_i x_i'`, the Hessian of `H_tau` at the
/// point whose residuals are `r`.
pub fn active_gram(problem: &Problem, r: ArrayView1<'_, f64>, tau: f64) -> Array2<f64> {
    let active: Vec<usize> = r
        .iter()
        .enumerate()
        .filter(|(_, w)| w.abs() <= tau)
        .map(|(i, _)| i)
        .collect();
    let xa = problem.x().select(Axis(0), &active);
    let mut g = xa.t().dot(&xa);
    g.mapv_inplace(|v| v / problem.n() as f64);
    g
}
