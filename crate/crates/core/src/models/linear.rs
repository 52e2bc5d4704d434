use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::Dataset;

pub const OLS_RIDGE: f64 = 1e-8;

/// `y = intercept + coef . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Set when the normal equations were singular and ridge was applied.
    pub ridge_fallback: bool,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Least squares with intercept on centered columns. When the centered
/// normal matrix is numerically singular, `ridge` is added to its diagonal.
pub fn least_squares(x: &[f64], y: &[f64], p: usize, ridge: f64) -> Result<LinearModel> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Data("least squares on empty data".into()));
    }
    let xm: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[i * p + j]).sum::<f64>() / n as f64).collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let a = DMatrix::from_fn(n, p, |i, j| x[i * p + j] - xm[j]);
    let b = DVector::from_fn(n, |i, _| y[i] - ym);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;

    let solve = |m: DMatrix<f64>| -> Option<DVector<f64>> {
        let chol = m.cholesky()?;
        let l = chol.l();
        let d: Vec<f64> = (0..p).map(|k| l[(k, k)]).collect();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        (p == 0 || lo * lo > 1e-12 * hi * hi).then(|| chol.solve(&atb))
    };
    let (beta, fallback) = match solve(ata.clone()) {
        Some(b) => (b, false),
        None => {
            let scale = (0..p).map(|k| ata[(k, k)]).fold(0.0f64, f64::max).max(1.0);
            let reg = ata + DMatrix::identity(p, p) * (ridge * scale);
            let b = reg
                .cholesky()
                .map(|c| c.solve(&atb))
                .ok_or_else(|| Error::Degenerate("normal equations singular even with ridge".into()))?;
            (b, true)
        }
    };
    let coef: Vec<f64> = beta.iter().copied().collect();
    let intercept = ym - coef.iter().zip(&xm).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coef,
        ridge_fallback: fallback,
    })
}

pub fn fit_ols(ds: &Dataset) -> Result<LinearModel> {
    if ds.n_rows() <= ds.n_features() {
        return Err(Error::Data(format!(
            "OLS needs more rows ({}) than features ({})",
            ds.n_rows(),
            ds.n_features()
        )));
    }
    least_squares(&ds.x, &ds.y, ds.n_features(), OLS_RIDGE)
}

/// k-nearest-neighbour regressor on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Standardized training rows, row-major.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn fit_knn(ds: &Dataset, k: usize) -> Result<KnnModel> {
    let (n, p) = (ds.n_rows(), ds.n_features());
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must be in 1..={n}, got {k}")));
    }
    let mut mean = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for j in 0..p {
        let col = ds.column(j);
        let (m, m2, _, _) = crate::stats::central_moments(&col).unwrap();
        mean[j] = m;
        let sd = m2.sqrt();
        scale[j] = if sd > 0.0 { sd } else { 1.0 };
    }
    let x = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| (ds.get(i, j) - mean[j]) / scale[j]).collect();
    Ok(KnnModel {
        k,
        mean,
        scale,
        x,
        y: ds.y.clone(),
    })
}

impl KnnModel {
    /// Mean target of the `k` nearest rows; distance ties go to the lower row index.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let p = self.mean.len();
        let z: Vec<f64> = (0..p).map(|j| (row[j] - self.mean[j]) / self.scale[j]).collect();
        let mut d: Vec<(f64, usize)> = (0..self.y.len())
            .map(|i| {
                let r = &self.x[i * p..(i + 1) * p];
                (r.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
        }
        d[..self.k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
    }
}

/// One-off KNN prediction for `row` against `ds`.
pub fn knn_predict(ds: &Dataset, row: &[f64], k: usize) -> Result<f64> {
    Ok(fit_knn(ds, k)?.predict(row))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        let m = fit_ols(&ds).unwrap();
        assert!(!m.ridge_fallback);
        let worst = (0..30).map(|i| (m.predict(ds.row(i)) - ds.y[i]).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn collinear_uses_ridge() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| 2.0 * i as f64).collect();
        let m = fit_ols(&Dataset::from_rows(&rows, y).unwrap()).unwrap();
        assert!(m.ridge_fallback);
        assert!((m.coef[0] + m.coef[1] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn knn_identities() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 3.0).collect();
        let ds = Dataset::from_rows(&rows, y.clone()).unwrap();
        assert_eq!(knn_predict(&ds, &rows[4], 1).unwrap(), y[4]);
        let mean = y.iter().sum::<f64>() / 10.0;
        assert!((knn_predict(&ds, &[100.0, 0.0], 10).unwrap() - mean).abs() < 1e-12);
        assert!(knn_predict(&ds, &rows[0], 11).is_err());
    }
}
