use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{least_squares, LinearModel};
use super::{fit_model, Model, ModelSpec, Regressor};
use crate::error::{Error, Result};
use crate::sampling::Dataset;

pub const META_RIDGE: f64 = 1e-6;

/// Linear meta-model over base-model predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub folds: usize,
    pub bases: Vec<Model>,
    pub meta: LinearModel,
}

impl StackedModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let z: Vec<f64> = self.bases.iter().map(|b| b.predict_row(row)).collect();
        self.meta.predict(&z)
    }

    pub fn ridge_fallback(&self) -> bool {
        self.meta.ridge_fallback
    }
}

/// Fold id per row: a seeded shuffle dealt round-robin into `folds` groups.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Out-of-fold base predictions fit the meta weights; bases are then refit
/// on all rows. A singular meta system falls back to ridge `1e-6`, recorded
/// in `meta.ridge_fallback`.
pub fn fit_stacked(ds: &Dataset, bases: &[ModelSpec], folds: usize, seed: u64) -> Result<StackedModel> {
    if bases.len() < 2 {
        return Err(Error::Parameter("stacking needs at least 2 base models".into()));
    }
    if folds < 2 || folds > ds.n_rows() {
        return Err(Error::Parameter(format!("folds must be in 2..={}, got {folds}", ds.n_rows())));
    }
    let n = ds.n_rows();
    let b = bases.len();
    let fold = fold_assignment(n, folds, seed);
    let mut z = vec![0.0; n * b];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
        let sub = ds.subset(&train);
        for (k, spec) in bases.iter().enumerate() {
            let m = fit_model(spec, &sub)?;
            for &i in &test {
                z[i * b + k] = m.predict_row(ds.row(i));
            }
        }
    }
    let meta = least_squares(&z, &ds.y, b, META_RIDGE)?;
    let bases = bases.iter().map(|s| fit_model(s, ds)).collect::<Result<Vec<_>>>()?;
    Ok(StackedModel { folds, bases, meta })
}
