//! Proximal gradient solver for `H_tau(beta) + lambda * ||beta||_1`.
//!
//! Steps are chosen by backtracking on the quadratic upper model of
//! `H_tau`; optional Nesterov momentum is restarted whenever the penalized
//! objective would increase, so the accepted objective sequence is
//! nonincreasing either way. Termination is certified by the KKT residual
//! of the convex problem.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{AhrError, Result};
use crate::huber::{
    check_tau, gradient_from_residuals, loss_from_residuals, HuberConfig, Problem,
};

/// Iterations between KKT checks when momentum is active (each check costs a
/// full gradient at the current iterate).
const ACCEL_CHECK_EVERY: usize = 10;
const MAX_BACKTRACKS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Target KKT residual.
    pub tol: f64,
    /// Initial step. `None` uses `d / trace(X'X / n)`.
    pub step_init: Option<f64>,
    pub backtrack_factor: f64,
    /// `None` enables momentum when `n * d >= 1e5`.
    pub acceleration: Option<bool>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 100_000,
            tol: 1e-8,
            step_init: None,
            backtrack_factor: 0.5,
            acceleration: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(AhrError::invalid("max_iter must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(AhrError::invalid("tol must be > 0"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(AhrError::invalid("backtrack_factor must lie in (0, 1)"));
        }
        if let Some(s) = self.step_init {
            if !(s > 0.0 && s.is_finite()) {
                return Err(AhrError::invalid("step_init must be positive and finite"));
            }
        }
        Ok(())
    }

    fn accelerate(&self, problem: &Problem) -> bool {
        self.acceleration
            .unwrap_or(problem.n() * problem.d() >= 100_000)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub beta_hat: Array1<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective after every accepted iterate, starting point first.
    pub objective_trace: Vec<f64>,
}

/// Proximal map of `kappa * |.|`.
pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

fn l1(beta: ArrayView1<'_, f64>) -> f64 {
    beta.iter().map(|b| b.abs()).sum()
}

fn kkt_from_gradient(beta: ArrayView1<'_, f64>, grad: ArrayView1<'_, f64>, lambda: f64) -> f64 {
    beta.iter()
        .zip(grad.iter())
        .map(|(&b, &g)| {
            if b > 0.0 {
                (g + lambda).abs()
            } else if b < 0.0 {
                (g - lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Sup-norm violation of `0 in grad H_tau(beta) + lambda * d||beta||_1`.
pub fn kkt_residual(beta: ArrayView1<'_, f64>, problem: &Problem, cfg: &HuberConfig) -> Result<f64> {
    check_tau(cfg.tau)?;
    let r = problem.residuals(beta)?;
    let g = gradient_from_residuals(problem, r.view(), cfg.tau);
    Ok(kkt_from_gradient(beta, g.view(), cfg.lambda))
}

/// Smallest penalty for which zero is a minimizer.
pub fn lambda_max(problem: &Problem, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let g = gradient_from_residuals(problem, problem.y(), tau);
    Ok(g.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Penalized objective `H_tau(beta) + lambda ||beta||_1`.
pub fn objective(beta: ArrayView1<'_, f64>, problem: &Problem, cfg: &HuberConfig) -> Result<f64> {
    check_tau(cfg.tau)?;
    let r = problem.residuals(beta)?;
    Ok(loss_from_residuals(r.view(), cfg.tau) + cfg.lambda * l1(beta))
}

fn ensure_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(AhrError::NumericalFailure(format!("non-finite {what}")))
    }
}

struct Point {
    beta: Array1<f64>,
    resid: Array1<f64>,
    loss: f64,
}

impl Point {
    fn at(problem: &Problem, beta: Array1<f64>, tau: f64) -> Result<Point> {
        let resid = problem.residuals_unchecked(beta.view());
        let loss = ensure_finite(loss_from_residuals(resid.view(), tau), "loss")?;
        Ok(Point { beta, resid, loss })
    }

    fn gradient(&self, problem: &Problem, tau: f64) -> Result<Array1<f64>> {
        let g = gradient_from_residuals(problem, self.resid.view(), tau);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(AhrError::NumericalFailure("non-finite gradient".into()));
        }
        Ok(g)
    }
}

/// Minimize `H_tau(beta) + lambda ||beta||_1`.
///
/// Non-convergence within `max_iter` is reported through
/// [`SolverResult::converged`], not as an error.
pub fn fit(
    problem: &Problem,
    cfg: &HuberConfig,
    sconfig: &SolverConfig,
    warm_start: Option<ArrayView1<'_, f64>>,
) -> Result<SolverResult> {
    let cfg = HuberConfig::new(cfg.tau, cfg.lambda)?;
    sconfig.validate()?;
    let (tau, lambda) = (cfg.tau, cfg.lambda);
    let d = problem.d();

    if lambda >= lambda_max(problem, tau)? {
        let zero = Array1::zeros(d);
        let obj = loss_from_residuals(problem.y(), tau);
        return Ok(SolverResult {
            beta_hat: zero,
            objective: obj,
            kkt_residual: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: vec![obj],
        });
    }

    let start = match warm_start {
        Some(w) => {
            problem.check_dim(w.len(), "warm start")?;
            if w.iter().any(|v| !v.is_finite()) {
                return Err(AhrError::invalid("warm start must be finite"));
            }
            w.to_owned()
        }
        None => Array1::zeros(d),
    };

    let mut step = match sconfig.step_init {
        Some(s) => s,
        None => {
            let trace = problem.x().iter().map(|v| v * v).sum::<f64>() / problem.n() as f64;
            d as f64 / trace
        }
    };
    let accelerate = sconfig.accelerate(problem);

    let mut x = Point::at(problem, start, tau)?;
    let mut grad_x = x.gradient(problem, tau)?;
    let mut obj_x = x.loss + lambda * l1(x.beta.view());
    let mut kkt = kkt_from_gradient(x.beta.view(), grad_x.view(), lambda);
    let mut trace = vec![obj_x];
    if kkt <= sconfig.tol {
        return Ok(SolverResult {
            beta_hat: x.beta,
            objective: obj_x,
            kkt_residual: kkt,
            iterations: 0,
            converged: true,
            objective_trace: trace,
        });
    }

    // Extrapolated point; `None` means it coincides with `x`.
    let mut y: Option<(Point, Array1<f64>)> = None;
    let mut momentum = 1.0f64;
    let mut grad_x_fresh = true;
    let mut iterations = 0;

    while iterations < sconfig.max_iter {
        iterations += 1;

        let (base, grad_base) = match &y {
            Some((p, g)) => (p, g),
            None => {
                if !grad_x_fresh {
                    grad_x = x.gradient(problem, tau)?;
                    grad_x_fresh = true;
                }
                (&x, &grad_x)
            }
        };

        let mut backtracks = 0;
        let mut cand_grad = None;
        let candidate = loop {
            let mut beta = Array1::zeros(d);
            Zip::from(&mut beta)
                .and(&base.beta)
                .and(grad_base)
                .for_each(|b, &v, &g| *b = soft_threshold(v - step * g, step * lambda));
            let cand = Point::at(problem, beta, tau)?;
            let diff = &cand.beta - &base.beta;
            let quad = diff.dot(&diff) / (2.0 * step);
            let model = base.loss + grad_base.dot(&diff) + quad + 1e-15 * base.loss.abs().max(1.0);
            if cand.loss <= model {
                break cand;
            }
            // Near the optimum the loss difference drowns in rounding. For a
            // convex loss <grad(c) - grad(b), c - b> <= |c - b|^2 / (2 step)
            // implies the same quadratic bound and is computed without
            // cancellation.
            let g = cand.gradient(problem, tau)?;
            if (&g - grad_base).dot(&diff) <= quad {
                cand_grad = Some(g);
                break cand;
            }
            backtracks += 1;
            if backtracks > MAX_BACKTRACKS {
                return Err(AhrError::NumericalFailure(
                    "backtracking line search did not terminate".into(),
                ));
            }
            step *= sconfig.backtrack_factor;
        };

        let obj_c = ensure_finite(candidate.loss + lambda * l1(candidate.beta.view()), "objective")?;
        if y.is_some() && obj_c > obj_x {
            // Momentum overshot: drop it and take a plain step from x.
            y = None;
            momentum = 1.0;
            iterations -= 1;
            continue;
        }

        let prev = std::mem::replace(&mut x, candidate);
        obj_x = obj_c;
        trace.push(obj_x);

        let check = !accelerate || iterations % ACCEL_CHECK_EVERY == 0;
        if check {
            grad_x = match cand_grad.take() {
                Some(g) => g,
                None => x.gradient(problem, tau)?,
            };
            grad_x_fresh = true;
            kkt = kkt_from_gradient(x.beta.view(), grad_x.view(), lambda);
            if kkt <= sconfig.tol {
                return Ok(SolverResult {
                    beta_hat: x.beta,
                    objective: obj_x,
                    kkt_residual: kkt,
                    iterations,
                    converged: true,
                    objective_trace: trace,
                });
            }
        } else {
            grad_x_fresh = false;
        }

        if accelerate {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let w = (momentum - 1.0) / next;
            momentum = next;
            if w > 0.0 {
                let beta_y = &x.beta + &((&x.beta - &prev.beta) * w);
                let p = Point::at(problem, beta_y, tau)?;
                let g = p.gradient(problem, tau)?;
                y = Some((p, g));
            } else {
                y = None;
            }
        }
    }

    if !grad_x_fresh {
        grad_x = x.gradient(problem, tau)?;
    }
    kkt = kkt_from_gradient(x.beta.view(), grad_x.view(), lambda);
    Ok(SolverResult {
        beta_hat: x.beta,
        objective: obj_x,
        kkt_residual: kkt,
        iterations,
        converged: kkt <= sconfig.tol,
        objective_trace: trace,
    })
}
