//! Rate exponents: slopes of log median error against log sample size.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{CliError, Result};
use crate::results::{real, ResultRow};
use crate::stats::{median, ols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupKey {
    Estimator,
    D,
    S,
    Delta,
    Gamma,
}

pub const ALL_KEYS: [GroupKey; 5] = [GroupKey::Estimator, GroupKey::D, GroupKey::S, GroupKey::Delta, GroupKey::Gamma];

impl FromStr for GroupKey {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "estimator" => GroupKey::Estimator,
            "d" => GroupKey::D,
            "s" => GroupKey::S,
            "delta" => GroupKey::Delta,
            "gamma" => GroupKey::Gamma,
            other => return Err(CliError::Config(format!("cannot group by {other:?}"))),
        })
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKey::Estimator => "estimator",
            GroupKey::D => "d",
            GroupKey::S => "s",
            GroupKey::Delta => "delta",
            GroupKey::Gamma => "gamma",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    N,
    /// `n (1 - gamma) / (1 + gamma)`.
    NEff,
}

impl FromStr for XAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "n" => Ok(XAxis::N),
            "n_eff" => Ok(XAxis::NEff),
            other => Err(CliError::Config(format!("x must be n or n_eff, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YAxis {
    L1,
    L2,
}

impl FromStr for YAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "l1_error" => Ok(YAxis::L1),
            "l2_error" => Ok(YAxis::L2),
            other => Err(CliError::Config(format!("y must be l1_error or l2_error, got {other:?}"))),
        }
    }
}

pub fn x_value(row: &ResultRow, x: XAxis) -> f64 {
    match x {
        XAxis::N => row.n as f64,
        XAxis::NEff => row.n as f64 * (1.0 - row.gamma) / (1.0 + row.gamma),
    }
}

fn y_value(row: &ResultRow, y: YAxis) -> f64 {
    match y {
        YAxis::L1 => row.l1_error,
        YAxis::L2 => row.l2_error,
    }
}

/// Rendered values of the grouping keys; ungrouped keys show `*`.
pub type GroupLabel = [String; 5];

fn label(row: &ResultRow, keys: &[GroupKey]) -> GroupLabel {
    ALL_KEYS.map(|k| {
        if !keys.contains(&k) {
            return "*".to_string();
        }
        match k {
            GroupKey::Estimator => row.estimator.to_string(),
            GroupKey::D => row.d.to_string(),
            GroupKey::S => row.s.to_string(),
            GroupKey::Delta => real(row.delta),
            GroupKey::Gamma => real(row.gamma),
        }
    })
}

/// Rows bucketed by group and then by x value (bit-exact), in sorted order.
pub fn bucket(rows: &[ResultRow], keys: &[GroupKey], x: XAxis, y: YAxis) -> BTreeMap<GroupLabel, Vec<(f64, Vec<f64>)>> {
    let mut groups: BTreeMap<GroupLabel, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let xv = x_value(r, x);
        // positive floats order like their bit patterns
        groups.entry(label(r, keys)).or_default().entry(xv.to_bits()).or_default().push(y_value(r, y));
    }
    groups
        .into_iter()
        .map(|(g, m)| (g, m.into_iter().map(|(b, v)| (f64::from_bits(b), v)).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub group: GroupLabel,
    pub points: usize,
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Groups with fewer than three distinct usable x values.
    pub skipped: Vec<GroupLabel>,
}

/// OLS slope of `log median y` on `log x` per group.
pub fn rate_fit(rows: &[ResultRow], keys: &[GroupKey], x: XAxis, y: YAxis) -> RateTable {
    let mut out = RateTable {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for (group, buckets) in bucket(rows, keys, x, y) {
        let (lx, ly): (Vec<f64>, Vec<f64>) = buckets
            .iter()
            .map(|(xv, ys)| (xv.ln(), median(ys).ln()))
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .unzip();
        match (lx.len() >= 3).then(|| ols(&lx, &ly)).flatten() {
            Some(f) => out.rows.push(RateRow {
                group,
                points: lx.len(),
                slope: f.slope,
                std_error: f.std_error,
                intercept: f.intercept,
            }),
            None => out.skipped.push(group),
        }
    }
    out
}

pub const RATES_HEADER: &str = "estimator,d,s,delta,gamma,x,y,points,slope,std_error,intercept";

pub fn rates_csv(table: &RateTable, x: &str, y: &str) -> String {
    let mut s = String::from(RATES_HEADER);
    s.push('\n');
    for r in &table.rows {
        s.push_str(&format!(
            "{},{x},{y},{},{},{},{}\n",
            r.group.join(","),
            r.points,
            real(r.slope),
            real(r.std_error),
            real(r.intercept)
        ));
    }
    s
}
