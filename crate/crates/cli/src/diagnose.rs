//! Replicated diagnostics over the sweep grid.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use ahr_core::adaptive::{select_tau, AdaptiveSpec};
use ahr_core::diagnostics::{
    bernstein_check, covariance_deviation, grad_supnorm_at_truth, lre_estimate, prop3_bound, truncated_tail_bound,
    truncated_tail_sum, ConcentrationReport, GradientBoundInputs, LreQuery,
};
use ahr_core::markov::{make_chain_with_gamma, ErrorModel};
use ndarray::Array1;
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::error::{CliError, Result};
use crate::results::real;
use crate::scenario::{cells, generate_cell, Cell};
use crate::stats::{median, ols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Diagnostic {
    Grad,
    Lre,
    Cov,
    Tail,
    Bernstein,
}

impl FromStr for Diagnostic {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "grad" => Diagnostic::Grad,
            "lre" => Diagnostic::Lre,
            "cov" => Diagnostic::Cov,
            "tail" => Diagnostic::Tail,
            "bernstein" => Diagnostic::Bernstein,
            other => return Err(CliError::Config(format!("unknown diagnostic {other:?}"))),
        })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Diagnostic::Grad => "grad",
            Diagnostic::Lre => "lre",
            Diagnostic::Cov => "cov",
            Diagnostic::Tail => "tail",
            Diagnostic::Bernstein => "bernstein",
        })
    }
}

/// One replicate of a dataset diagnostic. `reference` is the matching
/// bound or rate (gradient bound, `sqrt(A log d / n)`, truncated-tail
/// bound); `NaN` where there is none.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub rep: u64,
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub value: f64,
    pub reference: f64,
}

pub const DIAG_HEADER: &str = "rep,n,d,delta,gamma,tau,value,reference";
pub const BERNSTEIN_HEADER: &str = "n,gamma,epsilon,empirical_tail,bernstein_bound,std_error,flagged";

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseReport {
    pub rows: Vec<(Diagnostic, Vec<DiagRow>)>,
    pub bernstein: Vec<ConcentrationReport>,
}

fn diag_row(cfg: &SweepConfig, which: Diagnostic, cell: Cell, rep: u64) -> Result<DiagRow> {
    let (sc, ds) = generate_cell(cfg, cell, rep)?;
    let spec = AdaptiveSpec::new(cell.n, cfg.d, cell.delta, cell.gamma)?.with_constants(cfg.c_tau, cfg.c_lambda)?;
    let tau = select_tau(&spec)?;
    let m = cfg.states;
    let (value, reference) = match which {
        Diagnostic::Grad => {
            let de = cell.delta.min(1.0);
            let v = ErrorModel::homoskedastic(cfg.family, m, de)?.v_delta();
            let bound = prop3_bound(&GradientBoundInputs {
                n: cell.n,
                d: cfg.d,
                gamma: cell.gamma,
                tau,
                delta: cell.delta,
                sigma2: sc.cov.sigma2(),
                v,
                c: cfg.diagnostics.prop3_c,
            })?;
            (grad_supnorm_at_truth(&ds, tau)?, bound)
        }
        Diagnostic::Lre => {
            let q = LreQuery {
                num_directions: cfg.diagnostics.lre_directions,
                num_centers: cfg.diagnostics.lre_centers,
                seed: cfg.base_seed,
                ..LreQuery::new(cfg.diagnostics.lre_radius)
            };
            (lre_estimate(&ds, tau, &q)?, f64::NAN)
        }
        Diagnostic::Cov => {
            let a = (1.0 + cell.gamma) / (1.0 - cell.gamma);
            let rate = (a * (cfg.d as f64).ln() / cell.n as f64).sqrt();
            (covariance_deviation(&ds, &sc.cov, &sc.chain)?, rate)
        }
        Diagnostic::Tail => {
            let bound = truncated_tail_bound(sc.cov.sigma2(), tau, cell.delta, sc.err.v_delta());
            (truncated_tail_sum(&ds, &sc.cov, tau)?, bound)
        }
        Diagnostic::Bernstein => unreachable!("handled per chain"),
    };
    Ok(DiagRow {
        rep,
        n: cell.n,
        d: cfg.d,
        delta: cell.delta,
        gamma: cell.gamma,
        tau,
        value,
        reference,
    })
}

/// The `+-1` state function `f(a) = (-1)^a`.
pub fn rademacher_function(m: usize) -> Array1<f64> {
    Array1::from_shape_fn(m, |a| if a % 2 == 0 { 1.0 } else { -1.0 })
}

/// Bernstein tails for every `(gamma, n)` of the grid, in that order.
pub fn bernstein_reports(cfg: &SweepConfig) -> Result<Vec<ConcentrationReport>> {
    let mut out = Vec::new();
    for &gamma in &cfg.gamma_list {
        let chain = make_chain_with_gamma(cfg.states, gamma)?;
        let f = rademacher_function(cfg.states);
        for &n in &cfg.n_grid {
            out.push(bernstein_check(
                &chain,
                f.view(),
                1.0,
                n,
                cfg.diagnostics.bernstein_replicas,
                &cfg.diagnostics.epsilon_grid,
                cfg.base_seed,
            )?);
        }
    }
    Ok(out)
}

pub fn run_diagnose(cfg: &SweepConfig, which: &[Diagnostic], threads: Option<usize>) -> Result<DiagnoseReport> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let jobs: Vec<(Cell, u64)> = cells(cfg)
        .into_iter()
        .flat_map(|c| (0..cfg.replicates as u64).map(move |r| (c, r)))
        .collect();
    let mut report = DiagnoseReport {
        rows: Vec::new(),
        bernstein: Vec::new(),
    };
    let mut which = which.to_vec();
    which.sort();
    which.dedup();
    for w in which {
        if w == Diagnostic::Bernstein {
            report.bernstein = bernstein_reports(cfg)?;
            continue;
        }
        let rows = pool.install(|| {
            jobs.par_iter()
                .map(|&(cell, rep)| diag_row(cfg, w, cell, rep))
                .collect::<Result<Vec<_>>>()
        })?;
        report.rows.push((w, rows));
    }
    Ok(report)
}

pub fn diag_csv(rows: &[DiagRow]) -> String {
    let mut s = String::from(DIAG_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.rep,
            r.n,
            r.d,
            real(r.delta),
            real(r.gamma),
            real(r.tau),
            real(r.value),
            real(r.reference)
        )
        .unwrap();
    }
    s
}

pub fn bernstein_csv(reports: &[ConcentrationReport]) -> String {
    let mut s = String::from(BERNSTEIN_HEADER);
    s.push('\n');
    for r in reports {
        for k in 0..r.epsilon_grid.len() {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.n,
                real(r.gamma),
                real(r.epsilon_grid[k]),
                real(r.empirical_tail[k]),
                real(r.bernstein_bound[k]),
                real(r.std_error[k]),
                r.flagged[k]
            )
            .unwrap();
        }
    }
    s
}

/// Per `(delta, gamma)`: the slope of log median value against log n when
/// the grid has at least three sample sizes.
pub fn median_slopes(rows: &[DiagRow]) -> Vec<(f64, f64, Option<f64>)> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.delta, r.gamma)) {
            keys.push((r.delta, r.gamma));
        }
    }
    keys.into_iter()
        .map(|(delta, gamma)| {
            let mut ns: Vec<usize> = rows.iter().filter(|r| r.delta == delta && r.gamma == gamma).map(|r| r.n).collect();
            ns.sort_unstable();
            ns.dedup();
            let (lx, ly): (Vec<f64>, Vec<f64>) = ns
                .iter()
                .map(|&n| {
                    let v: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.delta == delta && r.gamma == gamma && r.n == n)
                        .map(|r| r.value)
                        .collect();
                    ((n as f64).ln(), median(&v).ln())
                })
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .unzip();
            let slope = (lx.len() >= 3).then(|| ols(&lx, &ly)).flatten().map(|f| f.slope);
            (delta, gamma, slope)
        })
        .collect()
}

pub fn summary(report: &DiagnoseReport) -> String {
    let mut s = String::new();
    for (w, rows) in &report.rows {
        writeln!(s, "[{w}]").unwrap();
        let mut cellkeys: Vec<(f64, f64, usize)> = Vec::new();
        for r in rows {
            if !cellkeys.contains(&(r.delta, r.gamma, r.n)) {
                cellkeys.push((r.delta, r.gamma, r.n));
            }
        }
        for (delta, gamma, n) in cellkeys {
            let pick = |f: fn(&DiagRow) -> f64| -> Vec<f64> {
                rows.iter()
                    .filter(|r| r.delta == delta && r.gamma == gamma && r.n == n)
                    .map(f)
                    .collect()
            };
            writeln!(
                s,
                "delta={delta} gamma={gamma} n={n}: median value {:.6e}, median reference {:.6e}",
                median(&pick(|r| r.value)),
                median(&pick(|r| r.reference))
            )
            .unwrap();
        }
        for (delta, gamma, slope) in median_slopes(rows) {
            if let Some(b) = slope {
                writeln!(s, "delta={delta} gamma={gamma}: slope of log median value vs log n = {b:.4}").unwrap();
            }
        }
    }
    if !report.bernstein.is_empty() {
        writeln!(s, "[bernstein]").unwrap();
        for r in &report.bernstein {
            let flagged = r.flagged.iter().filter(|&&f| f).count();
            writeln!(
                s,
                "gamma={} n={}: {flagged} of {} thresholds exceed the bound by more than 3 standard errors",
                r.gamma,
                r.n,
                r.epsilon_grid.len()
            )
            .unwrap();
        }
    }
    s
}
