use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{AhrError, Result};

/// State-to-covariate map `x_i = f_i(Z_i)` with its envelope.
///
/// A single table is a time-invariant map. With `K > 1` tables, row `i`
/// uses table `i mod K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMap {
    tables: Vec<Array2<f64>>,
    envelope: Array1<f64>,
    sigma4: f64,
}

impl CovariateMap {
    /// Uses the tightest envelope `M(a) = max_{k,j} |f_k(a, j)|`.
    pub fn new(tables: Vec<Array2<f64>>, pi: ArrayView1<'_, f64>) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| AhrError::invalid("covariate map needs at least one table"))?;
        let m = first.nrows();
        let envelope = Array1::from_iter((0..m).map(|a| {
            tables
                .iter()
                .flat_map(|t| t.row(a).to_vec())
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
        }));
        CovariateMap::with_envelope(tables, envelope, pi)
    }

    pub fn with_envelope(
        tables: Vec<Array2<f64>>,
        envelope: Array1<f64>,
        pi: ArrayView1<'_, f64>,
    ) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| AhrError::invalid("covariate map needs at least one table"))?;
        let (m, d) = first.dim();
        if m == 0 || d == 0 {
            return Err(AhrError::invalid("covariate tables must be non-empty"));
        }
        if tables.iter().any(|t| t.dim() != (m, d)) {
            return Err(AhrError::invalid("covariate tables must share one shape"));
        }
        if envelope.len() != m || pi.len() != m {
            return Err(AhrError::invalid(format!(
                "envelope and pi must have length m = {m}"
            )));
        }
        for t in &tables {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(AhrError::invalid("covariate tables must be finite"));
            }
            for (a, row) in t.axis_iter(Axis(0)).enumerate() {
                if row.iter().any(|v| v.abs() > envelope[a]) {
                    return Err(AhrError::invalid(format!(
                        "envelope does not dominate covariates in state {a}"
                    )));
                }
            }
        }
        let sigma4 = pi
            .iter()
            .zip(envelope.iter())
            .map(|(p, e)| p * e.powi(4))
            .sum();
        Ok(CovariateMap {
            tables,
            envelope,
            sigma4,
        })
    }

    /// Time-invariant map with i.i.d. standard normal entries.
    pub fn gaussian(m: usize, d: usize, pi: ArrayView1<'_, f64>, rng: &mut impl Rng) -> Result<Self> {
        let table = Array2::from_shape_simple_fn((m, d), || rng.sample::<f64, _>(StandardNormal));
        CovariateMap::new(vec![table], pi)
    }

    /// `m = d` states; state `j` maps to `scales[j] * e_j`.
    pub fn indicators(scales: ArrayView1<'_, f64>, pi: ArrayView1<'_, f64>) -> Result<Self> {
        let d = scales.len();
        let mut t = Array2::zeros((d, d));
        for j in 0..d {
            t[[j, j]] = scales[j];
        }
        CovariateMap::new(vec![t], pi)
    }

    pub fn m(&self) -> usize {
        self.envelope.len()
    }

    pub fn d(&self) -> usize {
        self.tables[0].ncols()
    }

    pub fn is_time_varying(&self) -> bool {
        self.tables.len() > 1
    }

    pub fn tables(&self) -> &[Array2<f64>] {
        &self.tables
    }

    pub fn envelope(&self) -> ArrayView1<'_, f64> {
        self.envelope.view()
    }

    /// `sum_a pi_a M(a)^4`.
    pub fn sigma4(&self) -> f64 {
        self.sigma4
    }

    /// `sqrt(sigma4)`.
    pub fn sigma2(&self) -> f64 {
        self.sigma4.sqrt()
    }

    pub fn row(&self, i: usize, state: usize) -> ArrayView1<'_, f64> {
        self.tables[i % self.tables.len()].row(state)
    }

    /// `sum_a pi_a f(a) f(a)'` for a time-invariant map.
    pub fn population_covariance(&self, pi: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
        if self.is_time_varying() {
            return Err(AhrError::invalid(
                "population covariance is only available for time-invariant maps",
            ));
        }
        Ok(weighted_gram(self.tables[0].view(), pi))
    }
}

/// `sum_a w_a f(a) f(a)'`.
pub(crate) fn weighted_gram(table: ArrayView2<'_, f64>, w: ArrayView1<'_, f64>) -> Array2<f64> {
    let mut scaled = table.to_owned();
    for (mut row, &wa) in scaled.axis_iter_mut(Axis(0)).zip(w.iter()) {
        row.mapv_inplace(|v| v * wa);
    }
    table.t().dot(&scaled)
}
