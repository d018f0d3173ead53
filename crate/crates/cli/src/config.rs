//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ahr_core::markov::dataset::{parse_key_values, read_key_values};
use ahr_core::markov::ErrorFamily;
use ahr_core::solver::SolverConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    /// Adaptive Huber regression.
    Ahr,
    /// `tau = inf`, same `lambda`.
    Lasso,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Ahr => "ahr",
            Estimator::Lasso => "lasso",
        })
    }
}

impl FromStr for Estimator {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ahr" => Ok(Estimator::Ahr),
            "lasso" => Ok(Estimator::Lasso),
            other => Err(CliError::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Sweep grid and data-generating process.
///
/// Besides the grid, a scenario fixes the chain size (`states`, default
/// `2 d`), the magnitude of the nonzero coefficients (`signal`) and the
/// threshold above which the theorem's sample-size condition is reported.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_grid: Vec<usize>,
    pub d: usize,
    pub s: usize,
    pub delta_list: Vec<f64>,
    pub gamma_list: Vec<f64>,
    pub replicates: usize,
    pub family: ErrorFamily,
    pub c_tau: f64,
    pub c_lambda: f64,
    pub base_seed: u64,
    pub estimators: Vec<Estimator>,
    pub states: usize,
    pub signal: f64,
    pub precondition_threshold: f64,
    pub solver: SolverConfig,
    pub diagnostics: DiagnoseConfig,
}

/// Settings used only by `diagnose`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseConfig {
    pub lre_radius: f64,
    pub lre_directions: usize,
    pub lre_centers: usize,
    /// Constant of the bias term in the gradient bound.
    pub prop3_c: f64,
    pub bernstein_replicas: usize,
    pub epsilon_grid: Vec<f64>,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            lre_radius: 1.0,
            lre_directions: 1000,
            lre_centers: 10,
            prop3_c: 1.0,
            bernstein_replicas: 10_000,
            epsilon_grid: (1..=10).map(|k| 0.05 * k as f64).collect(),
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_grid: vec![250, 500, 1000, 2000, 4000],
            d: 200,
            s: 5,
            delta_list: vec![1.0],
            gamma_list: vec![0.5],
            replicates: 50,
            family: ErrorFamily::StudentT { nu: 5.0 },
            c_tau: 1.0,
            c_lambda: 1.0,
            base_seed: 1,
            estimators: vec![Estimator::Ahr],
            states: 400,
            signal: 1.0,
            precondition_threshold: 0.5,
            solver: SolverConfig::default(),
            diagnostics: DiagnoseConfig::default(),
        }
    }
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| CliError::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_one(key, p))
        .collect()
}

impl SweepConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        SweepConfig::from_map(read_key_values(path)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        SweepConfig::from_map(parse_key_values(text, Path::new("<config>"))?)
    }

    /// Unknown keys are an error; missing keys take their defaults, except
    /// that `states` follows `d` when only `d` is given.
    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let mut c = SweepConfig::default();
        let mut states_given = false;
        for (k, v) in &map {
            c.set(k, v)?;
            states_given |= k == "states";
        }
        if !states_given {
            c.states = 2 * c.d;
        }
        c.validate()?;
        Ok(c)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let dg = &mut self.diagnostics;
        match key {
            "n_grid" => self.n_grid = parse_list(key, v)?,
            "d" => self.d = parse_one(key, v)?,
            "s" => self.s = parse_one(key, v)?,
            "delta_list" => self.delta_list = parse_list(key, v)?,
            "gamma_list" => self.gamma_list = parse_list(key, v)?,
            "replicates" => self.replicates = parse_one(key, v)?,
            "family" => self.family = v.trim().parse()?,
            "c_tau" => self.c_tau = parse_one(key, v)?,
            "c_lambda" => self.c_lambda = parse_one(key, v)?,
            "base_seed" => self.base_seed = parse_one(key, v)?,
            "estimators" => self.estimators = parse_list(key, v)?,
            "states" => self.states = parse_one(key, v)?,
            "signal" => self.signal = parse_one(key, v)?,
            "precondition_threshold" => self.precondition_threshold = parse_one(key, v)?,
            "max_iter" => self.solver.max_iter = parse_one(key, v)?,
            "tol" => self.solver.tol = parse_one(key, v)?,
            "step_init" => self.solver.step_init = Some(parse_one(key, v)?),
            "backtrack_factor" => self.solver.backtrack_factor = parse_one(key, v)?,
            "acceleration" => self.solver.acceleration = Some(parse_one(key, v)?),
            "lre_radius" => dg.lre_radius = parse_one(key, v)?,
            "lre_directions" => dg.lre_directions = parse_one(key, v)?,
            "lre_centers" => dg.lre_centers = parse_one(key, v)?,
            "prop3_c" => dg.prop3_c = parse_one(key, v)?,
            "bernstein_replicas" => dg.bernstein_replicas = parse_one(key, v)?,
            "epsilon_grid" => dg.epsilon_grid = parse_list(key, v)?,
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.n_grid.is_empty() || self.delta_list.is_empty() || self.gamma_list.is_empty() {
            return bad("n_grid, delta_list and gamma_list must be nonempty");
        }
        if self.n_grid.contains(&0) {
            return bad("n_grid entries must be positive");
        }
        if self.d < 2 {
            return bad("d must be >= 2");
        }
        if self.s == 0 || self.s > self.d {
            return bad("s must satisfy 1 <= s <= d");
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1");
        }
        if self.delta_list.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("delta_list entries must be positive");
        }
        if self.gamma_list.iter().any(|g| !(0.0..1.0).contains(g)) {
            return bad("gamma_list entries must lie in [0, 1)");
        }
        if !(self.c_tau > 0.0 && self.c_lambda > 0.0) {
            return bad("c_tau and c_lambda must be positive");
        }
        if self.estimators.is_empty() {
            return bad("estimators must be nonempty");
        }
        if self.states == 0 {
            return bad("states must be >= 1");
        }
        if !self.signal.is_finite() {
            return bad("signal must be finite");
        }
        self.solver.validate()?;
        let dg = &self.diagnostics;
        if !(dg.lre_radius > 0.0) || dg.lre_centers == 0 || dg.bernstein_replicas == 0 {
            return bad("lre_radius, lre_centers and bernstein_replicas must be positive");
        }
        if dg.epsilon_grid.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilon_grid entries must be positive");
        }
        for &delta in &self.delta_list {
            if self.family.moment_boundary() <= 1.0 + delta {
                return Err(CliError::Config(format!(
                    "{} has no finite moment of order 1 + {delta}",
                    self.family
                )));
            }
        }
        Ok(())
    }
}
