//! Adaptive robustification and regularization parameters.
//!
//! With `delta' = min(delta, 1)` and effective sample size
//! `n_eff = n (1 - gamma) / (1 + gamma)`:
//!
//! ```text
//! tau    = c_tau    * (n_eff / log d)^(1 / (1 + delta'))
//! lambda = c_lambda * (log d / n_eff)^(delta' / (1 + delta'))
//! ```
//!
//! `log` is the natural logarithm throughout.

use crate::error::{AhrError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSpec {
    pub n: usize,
    pub d: usize,
    /// Moment exponent: errors have finite `(1 + delta)`-th conditional moments.
    pub delta: f64,
    /// Norm of the Markov operator on mean-zero functions.
    pub gamma: f64,
    pub c_tau: f64,
    pub c_lambda: f64,
}

impl AdaptiveSpec {
    /// Spec with both multipliers set to one.
    pub fn new(n: usize, d: usize, delta: f64, gamma: f64) -> Result<Self> {
        let spec = AdaptiveSpec {
            n,
            d,
            delta,
            gamma,
            c_tau: 1.0,
            c_lambda: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_constants(mut self, c_tau: f64, c_lambda: f64) -> Result<Self> {
        self.c_tau = c_tau;
        self.c_lambda = c_lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(AhrError::invalid("n must be >= 1"));
        }
        if self.d < 2 {
            return Err(AhrError::invalid("d must be >= 2 so that log d > 0"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(AhrError::invalid(format!("delta must be > 0, got {}", self.delta)));
        }
        check_gamma(self.gamma)?;
        if !(self.c_tau > 0.0 && self.c_tau.is_finite())
            || !(self.c_lambda > 0.0 && self.c_lambda.is_finite())
        {
            return Err(AhrError::invalid("c_tau and c_lambda must be positive"));
        }
        Ok(())
    }

    /// `min(delta, 1)`.
    pub fn effective_delta(&self) -> f64 {
        self.delta.min(1.0)
    }

    /// `n (1 - gamma) / (1 + gamma)`.
    pub fn effective_n(&self) -> f64 {
        self.n as f64 * (1.0 - self.gamma) / (1.0 + self.gamma)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(AhrError::invalid(format!(
            "gamma must lie in [0, 1) (non-zero spectral gap), got {gamma}"
        )))
    }
}

/// Sample-size discount `(1 - gamma) / (1 + gamma)`.
pub fn effective_sample_factor(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok((1.0 - gamma) / (1.0 + gamma))
}

pub fn select_tau(spec: &AdaptiveSpec) -> Result<f64> {
    spec.validate()?;
    let de = spec.effective_delta();
    let base = effective_sample_factor(spec.gamma)? * spec.n as f64 / (spec.d as f64).ln();
    Ok(spec.c_tau * base.powf(1.0 / (1.0 + de)))
}

pub fn select_lambda(spec: &AdaptiveSpec) -> Result<f64> {
    spec.validate()?;
    let de = spec.effective_delta();
    let base = (spec.d as f64).ln() / (effective_sample_factor(spec.gamma)? * spec.n as f64);
    Ok(spec.c_lambda * base.powf(de / (1.0 + de)))
}

/// `s * sqrt((1 + gamma) / (1 - gamma) * log d / n)`; the error guarantees
/// need this to be small.
pub fn theorem_precondition(spec: &AdaptiveSpec, s: usize) -> Result<f64> {
    spec.validate()?;
    if s < 1 {
        return Err(AhrError::invalid("s must be >= 1"));
    }
    let inflation = 1.0 / effective_sample_factor(spec.gamma)?;
    Ok(s as f64 * (inflation * (spec.d as f64).ln() / spec.n as f64).sqrt())
}

/// Deterministic l1 and l2 error bounds `(48 s lambda / kappa, 12 sqrt(s) lambda / kappa)`
/// that hold whenever the localized restricted eigenvalue at radius
/// `48 s lambda / kappa` is at least `kappa` and `lambda >= 2 ||grad||_inf`.
pub fn prop1_bounds(s: usize, lambda: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(kappa > 0.0) {
        return Err(AhrError::invalid(format!("kappa must be > 0, got {kappa}")));
    }
    if !(lambda >= 0.0) {
        return Err(AhrError::invalid("lambda must be >= 0"));
    }
    let s = s as f64;
    Ok((48.0 * s * lambda / kappa, 12.0 * s.sqrt() * lambda / kappa))
}
