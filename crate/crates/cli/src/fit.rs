//! Single fits and the error metrics recorded for them.

use std::time::Instant;

use ahr_core::adaptive::{select_lambda, select_tau, AdaptiveSpec};
use ahr_core::huber::{HuberConfig, Problem, TruthSpec};
use ahr_core::solver::{fit, SolverConfig, SolverResult};
use ndarray::ArrayView1;

use crate::config::Estimator;
use crate::error::Result;
use crate::results::ResultRow;

/// Coefficients with `|beta_j|` at or below this count as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tuning {
    Adaptive { c_tau: f64, c_lambda: f64 },
    Fixed { tau: f64, lambda: f64 },
}

/// What the row records about the data besides the fit itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowContext {
    pub rep: u64,
    pub delta: f64,
    pub gamma: f64,
    pub seed: u64,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    pub l1: f64,
    pub l2: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Errors against the truth. An empty selected set has precision 1 (no
/// false positives); an empty true support has recall 1.
pub fn error_metrics(beta_hat: ArrayView1<'_, f64>, truth: &TruthSpec) -> ErrorMetrics {
    let diff = &beta_hat - &truth.beta_star();
    let l1 = diff.iter().map(|v| v.abs()).sum();
    let l2 = diff.dot(&diff).sqrt();
    let selected: Vec<usize> = (0..beta_hat.len()).filter(|&j| beta_hat[j].abs() > SUPPORT_THRESHOLD).collect();
    let support = truth.support();
    let hits = selected.iter().filter(|j| support.contains(j)).count() as f64;
    let ratio = |den: usize| if den == 0 { 1.0 } else { hits / den as f64 };
    ErrorMetrics {
        l1,
        l2,
        precision: ratio(selected.len()),
        recall: ratio(support.len()),
    }
}

/// `(tau, lambda)` for the AHR fit of an `n x d` problem.
pub fn tuning_parameters(tuning: Tuning, n: usize, d: usize, delta: f64, gamma: f64) -> Result<(f64, f64)> {
    match tuning {
        Tuning::Fixed { tau, lambda } => Ok((tau, lambda)),
        Tuning::Adaptive { c_tau, c_lambda } => {
            let spec = AdaptiveSpec::new(n, d, delta, gamma)?.with_constants(c_tau, c_lambda)?;
            Ok((select_tau(&spec)?, select_lambda(&spec)?))
        }
    }
}

pub struct FitOutput {
    pub estimator: Estimator,
    pub config: HuberConfig,
    pub result: SolverResult,
    pub row: ResultRow,
}

/// Fits each estimator; lasso shares the AHR `lambda` with `tau = inf`.
pub fn fit_estimators(
    problem: &Problem,
    truth: Option<&TruthSpec>,
    estimators: &[Estimator],
    tuning: Tuning,
    ctx: RowContext,
    solver: &SolverConfig,
) -> Result<Vec<FitOutput>> {
    let (n, d) = (problem.n(), problem.d());
    let (tau, lambda) = tuning_parameters(tuning, n, d, ctx.delta, ctx.gamma)?;
    let mut out = Vec::with_capacity(estimators.len());
    for &est in estimators {
        let config = match est {
            Estimator::Ahr => HuberConfig::new(tau, lambda)?,
            Estimator::Lasso => HuberConfig::least_squares(lambda)?,
        };
        let start = ctx.timing.then(Instant::now);
        let result = fit(problem, &config, solver, None)?;
        let wall_time_ms = start.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3);
        let m = truth.map(|t| error_metrics(result.beta_hat.view(), t));
        let row = ResultRow {
            rep: ctx.rep,
            n,
            d,
            s: truth.map_or(0, TruthSpec::sparsity),
            delta: ctx.delta,
            gamma: ctx.gamma,
            estimator: est,
            tau: config.tau,
            lambda: config.lambda,
            l1_error: m.as_ref().map_or(f64::NAN, |m| m.l1),
            l2_error: m.as_ref().map_or(f64::NAN, |m| m.l2),
            support_precision: m.as_ref().map_or(f64::NAN, |m| m.precision),
            support_recall: m.as_ref().map_or(f64::NAN, |m| m.recall),
            kkt_residual: result.kkt_residual,
            converged: result.converged,
            seed: ctx.seed,
            wall_time_ms,
        };
        out.push(FitOutput {
            estimator: est,
            config,
            result,
            row,
        });
    }
    Ok(out)
}

/// `j,estimator,beta_hat` lines for the fitted coefficients.
pub fn coefficients_csv(fits: &[FitOutput]) -> String {
    let mut s = String::from("j,estimator,beta_hat\n");
    for f in fits {
        for (j, b) in f.result.beta_hat.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", j + 1, f.estimator, crate::results::real(*b)));
        }
    }
    s
}
