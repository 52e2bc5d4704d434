use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ImportanceMethod, ImportanceReport, ReportMeta};
use crate::error::{Error, Result};
use crate::models::{sub_seed, Regressor};
use crate::sampling::Dataset;

/// Largest feature count accepted by exact subset enumeration.
pub const MAX_EXACT_FEATURES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapleyMode {
    /// Weighted sum over every coalition.
    Exact,
    /// Average marginal contribution over random feature orderings.
    Sampled { samples: usize },
}

impl Default for ShapleyMode {
    fn default() -> Self {
        ShapleyMode::Sampled { samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyResult {
    pub phi: Vec<f64>,
    /// Mean model output over the background (value of the empty coalition).
    pub base: f64,
}

/// Interventional coalition value: mean prediction over background rows with
/// the coalition's features taken from `x`.
struct ValueFn<'a, M: ?Sized> {
    model: &'a M,
    x: &'a [f64],
    bg: &'a Dataset,
    z: Vec<f64>,
}

impl<M: Regressor + ?Sized> ValueFn<'_, M> {
    fn eval(&mut self, in_coalition: impl Fn(usize) -> bool) -> f64 {
        let p = self.x.len();
        let mut s = 0.0;
        for b in 0..self.bg.n_rows() {
            let r = self.bg.row(b);
            for j in 0..p {
                self.z[j] = if in_coalition(j) { self.x[j] } else { r[j] };
            }
            s += self.model.predict_row(&self.z);
        }
        s / self.bg.n_rows() as f64
    }
}

fn check(row: &[f64], bg: &Dataset) -> Result<()> {
    if bg.n_rows() == 0 {
        return Err(Error::Parameter("Shapley background must be non-empty".into()));
    }
    if row.len() != bg.n_features() {
        return Err(Error::Shape {
            expected: bg.n_features(),
            got: row.len(),
        });
    }
    Ok(())
}

pub fn shapley_values<M: Regressor + ?Sized>(
    model: &M,
    row: &[f64],
    background: &Dataset,
    mode: ShapleyMode,
    seed: u64,
) -> Result<ShapleyResult> {
    check(row, background)?;
    let p = row.len();
    let mut v = ValueFn {
        model,
        x: row,
        bg: background,
        z: vec![0.0; p],
    };
    match mode {
        ShapleyMode::Exact => {
            if p > MAX_EXACT_FEATURES {
                return Err(Error::Parameter(format!(
                    "exact Shapley supports at most {MAX_EXACT_FEATURES} features, got {p}; use sampled mode"
                )));
            }
            let values: Vec<f64> = (0..1usize << p).map(|mask| v.eval(|j| mask >> j & 1 == 1)).collect();
            // weight[s] = s! (p - s - 1)! / p!
            let mut fact = vec![1.0f64; p + 1];
            for i in 1..=p {
                fact[i] = fact[i - 1] * i as f64;
            }
            let weight: Vec<f64> = (0..p).map(|s| fact[s] * fact[p - s - 1] / fact[p]).collect();
            let mut phi = vec![0.0; p];
            for (i, out) in phi.iter_mut().enumerate() {
                let bit = 1usize << i;
                let mut acc = 0.0;
                for mask in 0..1usize << p {
                    if mask & bit == 0 {
                        acc += weight[mask.count_ones() as usize] * (values[mask | bit] - values[mask]);
                    }
                }
                *out = acc;
            }
            Ok(ShapleyResult { phi, base: values[0] })
        }
        ShapleyMode::Sampled { samples } => {
            if samples == 0 {
                return Err(Error::Parameter("sampled Shapley needs samples >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = v.eval(|_| false);
            let mut phi = vec![0.0; p];
            let mut order: Vec<usize> = (0..p).collect();
            let mut member = vec![false; p];
            for _ in 0..samples {
                order.shuffle(&mut rng);
                member.iter_mut().for_each(|m| *m = false);
                let mut prev = base;
                for &j in &order {
                    member[j] = true;
                    let cur = v.eval(|k| member[k]);
                    phi[j] += cur - prev;
                    prev = cur;
                }
            }
            phi.iter_mut().for_each(|x| *x /= samples as f64);
            Ok(ShapleyResult { phi, base })
        }
    }
}

/// Mean absolute Shapley value per feature over the rows of `ds`.
pub fn shapley_global<M: Regressor + ?Sized>(
    model: &M,
    ds: &Dataset,
    background: &Dataset,
    mode: ShapleyMode,
    seed: u64,
) -> Result<ImportanceReport> {
    if ds.n_rows() == 0 {
        return Err(Error::Data("Shapley importance on an empty table".into()));
    }
    let per_row: Vec<Vec<f64>> = (0..ds.n_rows())
        .into_par_iter()
        .map(|i| shapley_values(model, ds.row(i), background, mode, sub_seed(seed, i as u64)).map(|r| r.phi))
        .collect::<Result<_>>()?;
    let n = ds.n_rows() as f64;
    let scores = (0..ds.n_features()).map(|j| per_row.iter().map(|phi| phi[j].abs()).sum::<f64>() / n).collect();
    let repeats = match mode {
        ShapleyMode::Exact => 0,
        ShapleyMode::Sampled { samples } => samples,
    };
    ImportanceReport::new(
        ImportanceMethod::Shapley,
        ds.names.clone(),
        scores,
        ReportMeta {
            repeats,
            seed,
            background: background.n_rows(),
        },
    )
}
