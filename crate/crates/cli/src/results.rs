//! Result rows and their fixed CSV encoding.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::Estimator;
use crate::error::{CliError, Result};

pub const RESULTS_HEADER: &str = "rep,n,d,s,delta,gamma,estimator,tau,lambda,l1_error,l2_error,\
support_precision,support_recall,kkt_residual,converged,seed,wall_time_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub rep: u64,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub delta: f64,
    pub gamma: f64,
    pub estimator: Estimator,
    pub tau: f64,
    pub lambda: f64,
    pub l1_error: f64,
    pub l2_error: f64,
    pub support_precision: f64,
    pub support_recall: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    pub seed: u64,
    pub wall_time_ms: f64,
}

/// 17 significant digits; round-trips every finite `f64`.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(320);
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.rep,
            self.n,
            self.d,
            self.s,
            real(self.delta),
            real(self.gamma),
            self.estimator,
            real(self.tau),
            real(self.lambda),
            real(self.l1_error),
            real(self.l2_error),
            real(self.support_precision),
            real(self.support_recall),
            real(self.kkt_residual),
            self.converged,
            self.seed,
            real(self.wall_time_ms),
        )
        .unwrap();
        s
    }

    pub fn from_csv(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 17 {
            return Err(format!("expected 17 fields, got {}", f.len()));
        }
        fn p<T: std::str::FromStr>(name: &str, v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| format!("{name}: cannot parse {v:?}: {e}"))
        }
        Ok(ResultRow {
            rep: p("rep", f[0])?,
            n: p("n", f[1])?,
            d: p("d", f[2])?,
            s: p("s", f[3])?,
            delta: p("delta", f[4])?,
            gamma: p("gamma", f[5])?,
            estimator: f[6].parse().map_err(|e: CliError| e.to_string())?,
            tau: p("tau", f[7])?,
            lambda: p("lambda", f[8])?,
            l1_error: p("l1_error", f[9])?,
            l2_error: p("l2_error", f[10])?,
            support_precision: p("support_precision", f[11])?,
            support_recall: p("support_recall", f[12])?,
            kkt_residual: p("kkt_residual", f[13])?,
            converged: p("converged", f[14])?,
            seed: p("seed", f[15])?,
            wall_time_ms: p("wall_time_ms", f[16])?,
        })
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::with_capacity(64 + rows.len() * 320);
    s.push_str(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, results_csv(rows)).map_err(|e| CliError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        _ => {
            return Err(CliError::Parse {
                path: path.to_owned(),
                line: 1,
                msg: "missing or wrong results header".into(),
            })
        }
    }
    lines
        .map(|(k, l)| {
            ResultRow::from_csv(l).map_err(|msg| CliError::Parse {
                path: path.to_owned(),
                line: k + 1,
                msg,
            })
        })
        .collect()
}
