//! The data-generating process behind one sweep cell.
//!
//! Within a replicate the covariate table is shared by every `(n, delta,
//! gamma)` cell, the error draws come from one stream indexed by position,
//! and the chain path comes from one stream of uniforms. Cells therefore
//! differ only in the parameter being varied, which pairs replicates across
//! the grid.

use ahr_core::huber::TruthSpec;
use ahr_core::markov::{generate_dataset_replicate, make_chain_with_gamma, ChainSpec, CovariateMap, Dataset, ErrorModel};
use ahr_core::rng::{stream_rng, Component};
use ndarray::Array1;

use crate::config::SweepConfig;
use crate::error::Result;

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub chain: ChainSpec,
    pub cov: CovariateMap,
    pub err: ErrorModel,
    pub truth: TruthSpec,
}

/// `beta*_j = +-signal` alternating for `j < s`, zero elsewhere.
pub fn truth_vector(d: usize, s: usize, signal: f64) -> Array1<f64> {
    Array1::from_shape_fn(d, |j| match j {
        j if j >= s => 0.0,
        j if j % 2 == 0 => signal,
        _ => -signal,
    })
}

/// Cells in output order: delta, then gamma, then n.
pub fn cells(cfg: &SweepConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &delta in &cfg.delta_list {
        for &gamma in &cfg.gamma_list {
            for &n in &cfg.n_grid {
                out.push(Cell { n, delta, gamma });
            }
        }
    }
    out
}

impl Scenario {
    pub fn new(cfg: &SweepConfig, delta: f64, gamma: f64, rep: u64) -> Result<Self> {
        let m = cfg.states;
        let chain = make_chain_with_gamma(m, gamma)?;
        let mut rng = stream_rng(cfg.base_seed, Component::Covariates, rep);
        let cov = CovariateMap::gaussian(m, cfg.d, chain.stationary(), &mut rng)?;
        let err = ErrorModel::homoskedastic(cfg.family, m, delta)?;
        let truth = TruthSpec::new(truth_vector(cfg.d, cfg.s, cfg.signal))?;
        Ok(Scenario { chain, cov, err, truth })
    }

    pub fn dataset(&self, n: usize, seed: u64, rep: u64) -> Result<Dataset> {
        Ok(generate_dataset_replicate(
            &self.chain,
            &self.cov,
            &self.err,
            &self.truth,
            n,
            seed,
            rep,
        )?)
    }
}

/// Dataset of `cell` for replicate `rep`.
pub fn generate_cell(cfg: &SweepConfig, cell: Cell, rep: u64) -> Result<(Scenario, Dataset)> {
    let sc = Scenario::new(cfg, cell.delta, cell.gamma, rep)?;
    let ds = sc.dataset(cell.n, cfg.base_seed, rep)?;
    Ok((sc, ds))
}
