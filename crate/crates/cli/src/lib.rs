//! Experiment harness for adaptive Huber regression: dataset generation,
//! fits, grid sweeps, rate estimation and diagnostics, all driven by a flat
//! `key = value` configuration and written as CSV.
//!
//! The `ahr` binary is a thin wrapper over these functions.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod fit;
pub mod rates;
pub mod results;
pub mod scenario;
pub mod stats;
pub mod sweep;

pub use config::{Estimator, SweepConfig};
pub use error::{CliError, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
