use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{fit_model, sub_seed, ModelSpec, Regressor};
use crate::sampling::{split_indices, Dataset};
use crate::stats;

/// Min, quartiles, median and mean of a sample (quartiles by linear interpolation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl SixNumber {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("summary of an empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("summary of a sample with non-finite values".into()));
        }
        let mut s = values.to_vec();
        stats::sort_f64(&mut s);
        let q = |p| stats::percentile_sorted(&s, p).unwrap();
        Ok(SixNumber {
            min: s[0],
            q1: q(25.0),
            median: q(50.0),
            mean: stats::mean(&s).unwrap(),
            q3: q(75.0),
            max: s[s.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    /// Lower edge of the reference-value interval.
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mse: f64,
    pub mean_residual: f64,
}

/// Accuracy of paired predictions. Residuals are `y - yhat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when the reference values have zero variance.
    pub r2: Option<f64>,
    pub mse: f64,
    pub n: usize,
    pub residuals: SixNumber,
    /// Breakdown over reference-value intervals; empty unless requested.
    pub bins: Vec<BinMetrics>,
}

pub fn evaluate(y: &[f64], yhat: &[f64], bin_width: Option<f64>) -> Result<EvalReport> {
    if y.len() != yhat.len() {
        return Err(Error::Shape {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    let resid: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    let mut bins = Vec::new();
    if let Some(w) = bin_width {
        if !(w > 0.0) {
            return Err(Error::Parameter(format!("bin width must be > 0, got {w}")));
        }
        let mut groups: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
        for (&t, &r) in y.iter().zip(&resid) {
            groups.entry((t / w).floor() as i64).or_default().push(r);
        }
        bins = groups
            .into_iter()
            .map(|(k, rs)| BinMetrics {
                lo: k as f64 * w,
                hi: (k + 1) as f64 * w,
                n: rs.len(),
                mse: rs.iter().map(|r| r * r).sum::<f64>() / rs.len() as f64,
                mean_residual: rs.iter().sum::<f64>() / rs.len() as f64,
            })
            .collect();
    }
    Ok(EvalReport {
        r2: stats::r_squared(y, yhat),
        mse: stats::mse(y, yhat),
        n: y.len(),
        residuals: SixNumber::of(&resid)?,
        bins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub r2: SixNumber,
    pub per_split: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, model: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["model", "min", "q1", "median", "mean", "q3", "max"])?;
        for r in &self.rows {
            let s = r.r2;
            w.write_record([r.model.clone(), s.min.to_string(), s.q1.to_string(), s.median.to_string(), s.mean.to_string(), s.q3.to_string(), s.max.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Test R² of every model over the same `n_splits` seeded train/test splits.
pub fn compare_models(
    ds: &Dataset,
    models: &[(String, ModelSpec)],
    n_splits: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<ComparisonTable> {
    if n_splits < 2 {
        return Err(Error::Parameter(format!("comparison needs n_splits >= 2, got {n_splits}")));
    }
    if models.is_empty() {
        return Err(Error::Parameter("no models to compare".into()));
    }
    let splits = (0..n_splits)
        .map(|s| split_indices(ds.n_rows(), test_fraction, sub_seed(seed, s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let rows = models
        .iter()
        .map(|(name, spec)| {
            let per_split = splits
                .iter()
                .map(|(tr, te)| {
                    let (train, test) = (ds.subset(tr), ds.subset(te));
                    let m = fit_model(spec, &train)?;
                    stats::r_squared(&test.y, &m.predict_all(&test))
                        .ok_or_else(|| Error::Data("test split has zero target variance".into()))
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| e.in_stage("compare"))?;
            Ok(ComparisonRow {
                model: name.clone(),
                r2: SixNumber::of(&per_split)?,
                per_split,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        n_splits,
        test_fraction,
        seed,
        rows,
    })
}
