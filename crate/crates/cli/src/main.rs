use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ahr_core::markov::dataset::read_key_values;
use ahr_core::markov::{metadata_path, read_dataset, write_dataset};
use ahr_cli::config::{Estimator, SweepConfig};
use ahr_cli::diagnose::{bernstein_csv, diag_csv, run_diagnose, summary, Diagnostic};
use ahr_cli::fit::{coefficients_csv, fit_estimators, RowContext, Tuning};
use ahr_cli::rates::{rate_fit, rates_csv, GroupKey, XAxis, YAxis};
use ahr_cli::results::{read_results, results_csv};
use ahr_cli::scenario::{generate_cell, Cell};
use ahr_cli::sweep::{run_sweep, SweepOptions};
use ahr_cli::{CliError, Result};
use clap::{Args, Parser, Subcommand};

/// Adaptive Huber regression experiments.
#[derive(Parser, Debug)]
#[command(name = "ahr", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Config override `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct CellArgs {
    /// Sample size (default: first of n_grid).
    #[arg(long)]
    n: Option<usize>,
    /// Moment exponent (default: first of delta_list).
    #[arg(long)]
    delta: Option<f64>,
    /// Chain operator norm (default: first of gamma_list).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    rep: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate one dataset as `data.csv` plus `data.meta`.
    Simulate {
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Fit one dataset (read with --data, or generated from the config).
    Fit {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fixed tau; needs --lambda. Default: adaptive choice.
        #[arg(long, requires = "lambda")]
        tau: Option<f64>,
        #[arg(long, requires = "tau")]
        lambda: Option<f64>,
        /// Comma-separated subset of ahr,lasso (default: config estimators).
        #[arg(long)]
        estimators: Option<String>,
        /// Record wall-clock time.
        #[arg(long)]
        timing: bool,
    },
    /// Run the full grid and write `results.csv`.
    Sweep {
        /// Record wall-clock time (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Slopes of log median error vs log sample size.
    Rates {
        /// Results CSV (default: <out>/results.csv).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "n")]
        x: String,
        #[arg(long, default_value = "l2_error")]
        y: String,
        #[arg(long, default_value = "estimator,d,s,delta,gamma")]
        group_by: String,
    },
    /// Replicated diagnostics over the grid.
    Diagnose {
        /// Comma-separated subset of grad,lre,cov,tail,bernstein.
        #[arg(long, default_value = "grad,lre,cov,tail,bernstein")]
        which: String,
    },
}

fn load_config(g: &Global) -> Result<SweepConfig> {
    let mut map = match &g.config {
        Some(p) => read_key_values(p)?,
        None => BTreeMap::new(),
    };
    for o in &g.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(seed) = g.seed {
        map.insert("base_seed".into(), seed.to_string());
    }
    SweepConfig::from_map(map)
}

fn list<T: std::str::FromStr<Err = CliError>>(s: &str) -> Result<Vec<T>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn cell_of(cfg: &SweepConfig, a: &CellArgs) -> Cell {
    Cell {
        n: a.n.unwrap_or(cfg.n_grid[0]),
        delta: a.delta.unwrap_or(cfg.delta_list[0]),
        gamma: a.gamma.unwrap_or(cfg.gamma_list[0]),
    }
}

/// Returns whether every fit converged.
fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.global)?;
    let out = &cli.global.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    match cli.command {
        Command::Simulate { cell } => {
            let (_, ds) = generate_cell(&cfg, cell_of(&cfg, &cell), cell.rep)?;
            let path = out.join("data.csv");
            write_dataset(&ds, &path)?;
            eprintln!("wrote {} and {}", path.display(), metadata_path(&path).display());
            Ok(true)
        }
        Command::Fit {
            cell,
            data,
            tau,
            lambda,
            estimators,
            timing,
        } => {
            let estimators: Vec<Estimator> = match estimators {
                Some(s) => list(&s)?,
                None => cfg.estimators.clone(),
            };
            let tuning = match (tau, lambda) {
                (Some(tau), Some(lambda)) => Tuning::Fixed { tau, lambda },
                _ => Tuning::Adaptive {
                    c_tau: cfg.c_tau,
                    c_lambda: cfg.c_lambda,
                },
            };
            let rep = cell.rep;
            let c = cell_of(&cfg, &cell);
            let ds = match &data {
                Some(p) => read_dataset(p)?,
                None => generate_cell(&cfg, c, rep)?.1,
            };
            // the sidecar, when present, describes the data better than the config
            let (delta, gamma, seed, rep) = match &ds.provenance {
                Some(p) if data.is_some() => (
                    cell.delta.unwrap_or(p.delta),
                    cell.gamma.unwrap_or(p.gamma),
                    p.seed,
                    p.replicate,
                ),
                _ => (c.delta, c.gamma, cfg.base_seed, rep),
            };
            let ctx = RowContext {
                rep,
                delta,
                gamma,
                seed,
                timing,
            };
            let fits = fit_estimators(&ds.problem, ds.truth.as_ref(), &estimators, tuning, ctx, &cfg.solver)?;
            let rows: Vec<_> = fits.iter().map(|f| f.row.clone()).collect();
            write(&out.join("results.csv"), &results_csv(&rows))?;
            write(&out.join("beta_hat.csv"), &coefficients_csv(&fits))?;
            print!("{}", results_csv(&rows));
            let ok = rows.iter().all(|r| r.converged);
            if !ok {
                eprintln!("error: solver did not reach the KKT tolerance");
            }
            Ok(ok)
        }
        Command::Sweep { timing } => {
            let rows = run_sweep(
                &cfg,
                SweepOptions {
                    threads: cli.global.threads,
                    timing,
                },
            )?;
            let path = out.join("results.csv");
            write(&path, &results_csv(&rows))?;
            let failed = rows.iter().filter(|r| !r.converged).count();
            if failed > 0 {
                eprintln!("warning: {failed} of {} fits did not converge", rows.len());
            }
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
            Ok(true)
        }
        Command::Rates { input, x, y, group_by } => {
            let input = input.unwrap_or_else(|| out.join("results.csv"));
            let rows = read_results(&input)?;
            let keys: Vec<GroupKey> = list(&group_by)?;
            let table = rate_fit(&rows, &keys, x.parse::<XAxis>()?, y.parse::<YAxis>()?);
            for g in &table.skipped {
                eprintln!("warning: group {} has fewer than 3 sample sizes; skipped", g.join(","));
            }
            let csv = rates_csv(&table, &x, &y);
            write(&out.join("rates.csv"), &csv)?;
            print!("{csv}");
            Ok(true)
        }
        Command::Diagnose { which } => {
            let which: Vec<Diagnostic> = list(&which)?;
            let report = run_diagnose(&cfg, &which, cli.global.threads)?;
            for (w, rows) in &report.rows {
                write(&out.join(format!("diag_{w}.csv")), &diag_csv(rows))?;
            }
            if which.contains(&Diagnostic::Bernstein) {
                write(&out.join("diag_bernstein.csv"), &bernstein_csv(&report.bernstein))?;
            }
            let text = summary(&report);
            write(&out.join("summary.txt"), &text)?;
            print!("{text}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
