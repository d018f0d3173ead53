//! Conditionally heteroskedastic, symmetric heavy-tailed errors
//! `eps_i = scale(Z_i) * base_i`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal, StudentT};
use statrs::function::gamma::ln_gamma;

use crate::error::{AhrError, Result};
use crate::rng::{stream_rng, Component};

/// Distribution of the unit-scale error `base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorFamily {
    /// `S * P` with `S` a fair sign and `P ~ Pareto(alpha)` on `[1, inf)`.
    SymmetricPareto { alpha: f64 },
    StudentT { nu: f64 },
    Gaussian,
}

impl ErrorFamily {
    /// Supremum of the admissible moment orders `p` with `E|base|^p < inf`.
    pub fn moment_boundary(&self) -> f64 {
        match *self {
            ErrorFamily::SymmetricPareto { alpha } => alpha,
            ErrorFamily::StudentT { nu } => nu,
            ErrorFamily::Gaussian => f64::INFINITY,
        }
    }

    /// `E|base|^p` in closed form.
    pub fn abs_moment(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) || p >= self.moment_boundary() {
            return Err(AhrError::InvalidModel(format!(
                "E|base|^{p} is infinite for {self}"
            )));
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        Ok(match *self {
            ErrorFamily::SymmetricPareto { alpha } => alpha / (alpha - p),
            ErrorFamily::Gaussian => {
                (0.5 * p * 2f64.ln() + ln_gamma(0.5 * (p + 1.0))).exp() / sqrt_pi
            }
            ErrorFamily::StudentT { nu } => {
                (0.5 * p * nu.ln() + ln_gamma(0.5 * (p + 1.0)) + ln_gamma(0.5 * (nu - p))
                    - ln_gamma(0.5 * nu))
                .exp()
                    / sqrt_pi
            }
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ErrorFamily::SymmetricPareto { alpha } => alpha > 0.0 && alpha.is_finite(),
            ErrorFamily::StudentT { nu } => nu > 0.0 && nu.is_finite(),
            ErrorFamily::Gaussian => true,
        };
        if ok {
            Ok(())
        } else {
            Err(AhrError::InvalidModel(format!("bad family parameter: {self}")))
        }
    }

    fn sampler(&self) -> BaseSampler {
        match *self {
            ErrorFamily::SymmetricPareto { alpha } => {
                BaseSampler::Pareto(Pareto::new(1.0, alpha).expect("validated"))
            }
            ErrorFamily::StudentT { nu } => BaseSampler::StudentT(StudentT::new(nu).expect("validated")),
            ErrorFamily::Gaussian => BaseSampler::Gaussian,
        }
    }
}

impl fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorFamily::SymmetricPareto { alpha } => write!(f, "symmetric-pareto:{alpha}"),
            ErrorFamily::StudentT { nu } => write!(f, "student-t:{nu}"),
            ErrorFamily::Gaussian => write!(f, "gaussian"),
        }
    }
}

/// Parses `gaussian`, `student-t:<nu>` or `symmetric-pareto:<alpha>`.
impl FromStr for ErrorFamily {
    type Err = AhrError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s, None),
        };
        let value = |what: &str| -> Result<f64> {
            param
                .ok_or_else(|| AhrError::InvalidModel(format!("{name} needs a {what} parameter")))?
                .parse::<f64>()
                .map_err(|e| AhrError::InvalidModel(format!("bad {what} in {s:?}: {e}")))
        };
        let fam = match name {
            "gaussian" => ErrorFamily::Gaussian,
            "student-t" => ErrorFamily::StudentT { nu: value("nu")? },
            "symmetric-pareto" => ErrorFamily::SymmetricPareto {
                alpha: value("alpha")?,
            },
            other => return Err(AhrError::InvalidModel(format!("unknown error family {other:?}"))),
        };
        fam.validate()?;
        Ok(fam)
    }
}

enum BaseSampler {
    Pareto(Pareto<f64>),
    StudentT(StudentT<f64>),
    Gaussian,
}

impl BaseSampler {
    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            BaseSampler::Pareto(p) => {
                let mag = p.sample(rng);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
            BaseSampler::StudentT(t) => t.sample(rng),
            BaseSampler::Gaussian => rng.sample(StandardNormal),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    family: ErrorFamily,
    scales: Array1<f64>,
    delta: f64,
    v_delta: f64,
}

impl ErrorModel {
    pub fn new(family: ErrorFamily, per_state_scale: Array1<f64>, delta: f64) -> Result<Self> {
        family.validate()?;
        if per_state_scale.is_empty()
            || per_state_scale.iter().any(|s| !(*s >= 0.0) || !s.is_finite())
        {
            return Err(AhrError::InvalidModel(
                "per-state scales must be non-empty, finite and >= 0".into(),
            ));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(AhrError::InvalidModel(format!("delta must be > 0, got {delta}")));
        }
        let moment = family.abs_moment(1.0 + delta)?;
        let v_delta = per_state_scale
            .iter()
            .map(|s| s.powf(1.0 + delta) * moment)
            .fold(0.0, f64::max);
        Ok(ErrorModel {
            family,
            scales: per_state_scale,
            delta,
            v_delta,
        })
    }

    /// Same scale in all `m` states.
    pub fn homoskedastic(family: ErrorFamily, m: usize, delta: f64) -> Result<Self> {
        ErrorModel::new(family, Array1::ones(m), delta)
    }

    pub fn family(&self) -> ErrorFamily {
        self.family
    }

    pub fn scales(&self) -> ArrayView1<'_, f64> {
        self.scales.view()
    }

    pub fn m(&self) -> usize {
        self.scales.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn v_delta(&self) -> f64 {
        self.v_delta
    }
}

/// `sup_a scale(a)^{1+delta} E|base|^{1+delta}`.
pub fn moment_vdelta(model: &ErrorModel) -> Result<f64> {
    Ok(model.v_delta)
}

pub fn sample_errors(z: &[usize], model: &ErrorModel, seed: u64) -> Result<Array1<f64>> {
    sample_errors_replicate(z, model, seed, 0)
}

/// One base draw per index regardless of state, so paths of different
/// lengths share prefixes and chains with different `gamma` share draws.
pub fn sample_errors_replicate(
    z: &[usize],
    model: &ErrorModel,
    seed: u64,
    replicate: u64,
) -> Result<Array1<f64>> {
    if let Some(bad) = z.iter().find(|&&s| s >= model.m()) {
        return Err(AhrError::invalid(format!(
            "state {bad} out of range for an error model with {} states",
            model.m()
        )));
    }
    let mut rng = stream_rng(seed, Component::Errors, replicate);
    let sampler = model.family.sampler();
    Ok(z.iter()
        .map(|&s| model.scales[s] * sampler.draw(&mut rng))
        .collect())
}
