//! Simulated datasets and their CSV form.
//!
//! The data file has header `i,z,y,x_1,...,x_d` with one row per
//! observation. Provenance goes to a sidecar (`<stem>.meta`) of
//! `key = value` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1};

use super::chain::{ChainSampler, ChainSpec};
use super::covariates::CovariateMap;
use super::errors::{sample_errors_replicate, ErrorFamily, ErrorModel};
use crate::error::{AhrError, Result};
use crate::huber::{Problem, TruthSpec};
use crate::rng::{stream_rng, Component};

/// Everything needed to regenerate a dataset bit for bit, given the same
/// covariate tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub family: ErrorFamily,
    pub delta: f64,
    pub gamma: f64,
    pub m: usize,
    pub seed: u64,
    pub replicate: u64,
    pub beta_star: Vec<f64>,
}

impl Provenance {
    pub fn to_metadata(&self) -> String {
        let mut s = String::new();
        match self.family {
            ErrorFamily::SymmetricPareto { alpha } => {
                writeln!(s, "family = symmetric-pareto").unwrap();
                writeln!(s, "alpha = {alpha}").unwrap();
            }
            ErrorFamily::StudentT { nu } => {
                writeln!(s, "family = student-t").unwrap();
                writeln!(s, "nu = {nu}").unwrap();
            }
            ErrorFamily::Gaussian => writeln!(s, "family = gaussian").unwrap(),
        }
        writeln!(s, "delta = {}", self.delta).unwrap();
        writeln!(s, "gamma = {}", self.gamma).unwrap();
        writeln!(s, "m = {}", self.m).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "replicate = {}", self.replicate).unwrap();
        let beta: Vec<String> = self.beta_star.iter().map(|b| b.to_string()).collect();
        writeln!(s, "beta_star = {}", beta.join(",")).unwrap();
        s
    }

    pub fn from_metadata(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| AhrError::invalid(format!("metadata is missing key {k:?}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|e| AhrError::invalid(format!("metadata key {k}: {e}")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|e| AhrError::invalid(format!("metadata key {k}: {e}")))
        };
        let family = match get("family")? {
            "symmetric-pareto" => ErrorFamily::SymmetricPareto { alpha: num("alpha")? },
            "student-t" => ErrorFamily::StudentT { nu: num("nu")? },
            "gaussian" => ErrorFamily::Gaussian,
            other => return Err(AhrError::invalid(format!("unknown family {other:?}"))),
        };
        let beta_star = get("beta_star")?
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| AhrError::invalid(format!("beta_star entry {v:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Provenance {
            family,
            delta: num("delta")?,
            gamma: num("gamma")?,
            m: int("m")? as usize,
            seed: int("seed")?,
            replicate: map.get("replicate").map_or(Ok(0), |_| int("replicate"))?,
            beta_star,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub z: Vec<usize>,
    pub problem: Problem,
    /// Present for simulated data; not stored in the CSV.
    pub eps: Option<Array1<f64>>,
    pub truth: Option<TruthSpec>,
    pub provenance: Option<Provenance>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn d(&self) -> usize {
        self.problem.d()
    }

    pub fn require_truth(&self) -> Result<&TruthSpec> {
        self.truth
            .as_ref()
            .ok_or_else(|| AhrError::invalid("dataset carries no ground truth"))
    }

    pub fn require_eps(&self) -> Result<ArrayView1<'_, f64>> {
        self.eps
            .as_ref()
            .map(|e| e.view())
            .ok_or_else(|| AhrError::invalid("dataset carries no error draws"))
    }
}

/// `x_i' beta + eps_i` in a fixed summation order.
fn response(x: &Array2<f64>, beta: ArrayView1<'_, f64>, eps: ArrayView1<'_, f64>) -> Array1<f64> {
    Array1::from_iter(
        x.rows()
            .into_iter()
            .zip(eps.iter())
            .map(|(row, e)| row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>() + e),
    )
}

pub fn generate_dataset(
    chain: &ChainSpec,
    cov: &CovariateMap,
    err: &ErrorModel,
    truth: &TruthSpec,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    generate_dataset_replicate(chain, cov, err, truth, n, seed, 0)
}

/// Draws `Z` from the chain stream and `eps` from the error stream of
/// `(seed, replicate)`, then sets `x_i = f_i(Z_i)`, `y = X beta* + eps`.
pub fn generate_dataset_replicate(
    chain: &ChainSpec,
    cov: &CovariateMap,
    err: &ErrorModel,
    truth: &TruthSpec,
    n: usize,
    seed: u64,
    replicate: u64,
) -> Result<Dataset> {
    let m = chain.m();
    if cov.m() != m || err.m() != m {
        return Err(AhrError::invalid(format!(
            "state counts disagree: chain {m}, covariates {}, errors {}",
            cov.m(),
            err.m()
        )));
    }
    if truth.d() != cov.d() {
        return Err(AhrError::invalid(format!(
            "beta_star has length {} but covariates have d = {}",
            truth.d(),
            cov.d()
        )));
    }
    if n == 0 {
        return Err(AhrError::invalid("n must be >= 1"));
    }
    let mut rng = stream_rng(seed, Component::Chain, replicate);
    let z = ChainSampler::new(chain).sample(n, &mut rng);
    let eps = sample_errors_replicate(&z, err, seed, replicate)?;
    let d = cov.d();
    let mut x = Array2::zeros((n, d));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        row.assign(&cov.row(i, z[i]));
    }
    let y = response(&x, truth.beta_star(), eps.view());
    Ok(Dataset {
        z,
        problem: Problem::new(x, y)?,
        eps: Some(eps),
        truth: Some(truth.clone()),
        provenance: Some(Provenance {
            family: err.family(),
            delta: err.delta(),
            gamma: chain.gamma(),
            m,
            seed,
            replicate,
            beta_star: truth.beta_star().to_vec(),
        }),
    })
}

/// Checks `y = X beta* + eps` and `x_i = f_i(Z_i)` bit for bit.
pub fn verify_dataset(ds: &Dataset, cov: &CovariateMap) -> bool {
    let (Some(eps), Some(truth)) = (&ds.eps, &ds.truth) else {
        return false;
    };
    let x = ds.problem.x().to_owned();
    let rows_ok = x
        .rows()
        .into_iter()
        .enumerate()
        .all(|(i, row)| row == cov.row(i, ds.z[i]));
    rows_ok && response(&x, truth.beta_star(), eps.view()) == ds.problem.y()
}

pub fn metadata_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

/// Writes the data CSV and, when provenance is known, its sidecar.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let d = ds.d();
    let mut out = String::with_capacity(ds.n() * (d + 3) * 12);
    out.push_str("i,z,y");
    for j in 1..=d {
        write!(out, ",x_{j}").unwrap();
    }
    out.push('\n');
    let (x, y) = (ds.problem.x(), ds.problem.y());
    for i in 0..ds.n() {
        write!(out, "{},{},{}", i + 1, ds.z[i], y[i]).unwrap();
        for v in x.row(i) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| AhrError::io(path, e))?;
    if let Some(p) = &ds.provenance {
        let meta = metadata_path(path);
        fs::write(&meta, p.to_metadata()).map_err(|e| AhrError::io(meta, e))?;
    }
    Ok(())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| AhrError::io(path, e))?;
    parse_key_values(&text, path)
}

pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| AhrError::Parse {
            path: path.to_owned(),
            line: k + 1,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        map.insert(key.trim().to_owned(), value.trim().to_owned());
    }
    Ok(map)
}

/// Reads a data CSV plus its sidecar if one exists. Truth is restored from
/// the sidecar; `eps` is not stored and comes back as `None`.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| AhrError::io(path, e))?;
    let parse_err = |line: usize, msg: String| AhrError::Parse {
        path: path.to_owned(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[..3] != ["i", "z", "y"] {
        return Err(parse_err(1, format!("bad header {header:?}")));
    }
    for (j, c) in cols[3..].iter().enumerate() {
        if *c != format!("x_{}", j + 1) {
            return Err(parse_err(1, format!("expected column x_{}, got {c:?}", j + 1)));
        }
    }
    let d = cols.len() - 3;
    let mut z = Vec::new();
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (k, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 3 {
            return Err(parse_err(
                k + 1,
                format!("expected {} fields, got {}", d + 3, fields.len()),
            ));
        }
        z.push(
            fields[1]
                .parse::<usize>()
                .map_err(|e| parse_err(k + 1, format!("state: {e}")))?,
        );
        y.push(
            fields[2]
                .parse::<f64>()
                .map_err(|e| parse_err(k + 1, format!("y: {e}")))?,
        );
        for f in &fields[3..] {
            x.push(f.parse::<f64>().map_err(|e| parse_err(k + 1, format!("x: {e}")))?);
        }
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, d), x).map_err(|e| AhrError::invalid(e.to_string()))?;
    let problem = Problem::new(x, Array1::from(y))?;

    let meta = metadata_path(path);
    let (truth, provenance) = if meta.exists() {
        let p = Provenance::from_metadata(&read_key_values(&meta)?)?;
        if p.beta_star.len() != d {
            return Err(AhrError::invalid(format!(
                "{}: beta_star has length {} but the data has d = {d}",
                meta.display(),
                p.beta_star.len()
            )));
        }
        (Some(TruthSpec::new(Array1::from(p.beta_star.clone()))?), Some(p))
    } else {
        (None, None)
    };
    Ok(Dataset {
        z,
        problem,
        eps: None,
        truth,
        provenance,
    })
}
