//! Grid sweeps over `(delta, gamma, n)` with replicates.

use ahr_core::adaptive::{theorem_precondition, AdaptiveSpec};
use ahr_core::solver::SolverConfig;
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::error::{CliError, Result};
use crate::fit::{fit_estimators, RowContext, Tuning};
use crate::results::ResultRow;
use crate::scenario::{cells, generate_cell, Cell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Record wall-clock time per fit. Off by default so that repeated
    /// sweeps produce identical files.
    pub timing: bool,
}

/// Cells whose sample-size condition exceeds the configured threshold,
/// with the value of the condition.
pub fn precondition_warnings(cfg: &SweepConfig) -> Result<Vec<(Cell, f64)>> {
    let mut out = Vec::new();
    for cell in cells(cfg) {
        let spec = AdaptiveSpec::new(cell.n, cfg.d, cell.delta, cell.gamma)?;
        let v = theorem_precondition(&spec, cfg.s)?;
        if v > cfg.precondition_threshold {
            out.push((cell, v));
        }
    }
    Ok(out)
}

fn run_job(cfg: &SweepConfig, cell: Cell, rep: u64, solver: &SolverConfig, timing: bool) -> Vec<ResultRow> {
    let ctx = RowContext {
        rep,
        delta: cell.delta,
        gamma: cell.gamma,
        seed: cfg.base_seed,
        timing,
    };
    let tuning = Tuning::Adaptive {
        c_tau: cfg.c_tau,
        c_lambda: cfg.c_lambda,
    };
    let attempt = || -> Result<Vec<ResultRow>> {
        let (sc, ds) = generate_cell(cfg, cell, rep)?;
        let fits = fit_estimators(&ds.problem, Some(&sc.truth), &cfg.estimators, tuning, ctx, solver)?;
        Ok(fits.into_iter().map(|f| f.row).collect())
    };
    match attempt() {
        Ok(rows) => rows,
        Err(e) => {
            // the sweep continues; the failure is visible as non-converged NaN rows
            eprintln!("warning: n={} delta={} gamma={} rep={rep}: {e}", cell.n, cell.delta, cell.gamma);
            cfg.estimators
                .iter()
                .map(|&estimator| ResultRow {
                    rep,
                    n: cell.n,
                    d: cfg.d,
                    s: cfg.s,
                    delta: cell.delta,
                    gamma: cell.gamma,
                    estimator,
                    tau: f64::NAN,
                    lambda: f64::NAN,
                    l1_error: f64::NAN,
                    l2_error: f64::NAN,
                    support_precision: f64::NAN,
                    support_recall: f64::NAN,
                    kkt_residual: f64::NAN,
                    converged: false,
                    seed: cfg.base_seed,
                    wall_time_ms: 0.0,
                })
                .collect()
        }
    }
}

/// One row per cell x replicate x estimator, in `(cell, replicate,
/// estimator)` order regardless of how jobs are scheduled.
pub fn run_sweep(cfg: &SweepConfig, opts: SweepOptions) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    for (cell, v) in precondition_warnings(cfg)? {
        eprintln!(
            "warning: n={} delta={} gamma={}: s*sqrt((1+gamma)/(1-gamma)*log(d)/n) = {v:.3} exceeds {}",
            cell.n, cell.delta, cell.gamma, cfg.precondition_threshold
        );
    }
    let jobs: Vec<(Cell, u64)> = cells(cfg)
        .into_iter()
        .flat_map(|c| (0..cfg.replicates as u64).map(move |r| (c, r)))
        .collect();
    let solver = &cfg.solver;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<Vec<ResultRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, rep)| run_job(cfg, cell, rep, solver, opts.timing))
            .collect()
    });
    Ok(nested.into_iter().flatten().collect())
}
