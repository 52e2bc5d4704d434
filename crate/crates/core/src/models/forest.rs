use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, FeatureSampler, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::sampling::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            min_leaf: 5,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or_else(|| n_features.div_ceil(3).max(1))
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
        }
    }
}

/// How each tree's training rows are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum Bootstrap {
    /// `n` rows sampled with replacement (the normal case).
    Random,
    /// Every tree sees every row once.
    Identity,
    /// Explicit per-tree row lists.
    Custom(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    /// Row indices each tree was trained on, with repeats.
    pub bootstrap: Vec<Vec<u32>>,
}

/// 64-bit finalizer from splitmix64.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for unit `index` under `seed`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn fit_forest(ds: &Dataset, params: ForestParams) -> Result<ForestModel> {
    fit_forest_with(ds, params, Bootstrap::Random)
}

pub fn fit_forest_with(ds: &Dataset, params: ForestParams, bootstrap: Bootstrap) -> Result<ForestModel> {
    let p = ds.n_features();
    let n = ds.n_rows();
    if params.n_trees == 0 {
        return Err(Error::Parameter("n_trees must be >= 1".into()));
    }
    let mtry = params.resolved_mtry(p);
    if mtry == 0 || mtry > p {
        return Err(Error::Parameter(format!("mtry must be in 1..={p}, got {mtry}")));
    }
    if params.min_leaf == 0 {
        return Err(Error::Parameter("min_leaf must be >= 1".into()));
    }
    if n < 2 {
        return Err(Error::Data(format!("forest needs at least 2 rows, got {n}")));
    }
    if let Bootstrap::Custom(b) = &bootstrap {
        if b.len() != params.n_trees || b.iter().flatten().any(|&i| i >= n) || b.iter().any(Vec::is_empty) {
            return Err(Error::Parameter("custom bootstrap must list non-empty in-range rows for every tree".into()));
        }
    }
    let tp = params.tree_params();
    let fitted: Vec<(Tree, Vec<u32>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, t as u64));
            let rows: Vec<usize> = match &bootstrap {
                Bootstrap::Random => (0..n).map(|_| rng.gen_range(0..n)).collect(),
                Bootstrap::Identity => (0..n).collect(),
                Bootstrap::Custom(b) => b[t].clone(),
            };
            let boot = rows.iter().map(|&i| i as u32).collect();
            let sampler = FeatureSampler { rng: &mut rng, mtry };
            (grow(ds, &ds.y, rows, tp, Some(sampler)), boot)
        })
        .collect();
    let (trees, bootstrap) = fitted.into_iter().unzip();
    Ok(ForestModel {
        params,
        trees,
        bootstrap,
    })
}

impl ForestModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Per tree, a flag per row that is set when the row is out of bag.
    pub fn oob_masks(&self, n_rows: usize) -> Result<Vec<Vec<bool>>> {
        self.bootstrap
            .iter()
            .map(|b| {
                let mut oob = vec![true; n_rows];
                for &i in b {
                    let i = i as usize;
                    if i >= n_rows {
                        return Err(Error::Shape {
                            expected: n_rows,
                            got: i + 1,
                        });
                    }
                    oob[i] = false;
                }
                Ok(oob)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobError {
    pub mse: f64,
    /// Rows judged by at least one out-of-bag tree.
    pub n_used: usize,
    /// Rows that every tree trained on.
    pub n_skipped: usize,
}

/// Mean squared error of out-of-bag predictions; each row is predicted by
/// the average of the trees that did not train on it.
pub fn oob_error(model: &ForestModel, ds: &Dataset) -> Result<OobError> {
    let n = ds.n_rows();
    let masks = model.oob_masks(n)?;
    let per_row: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = ds.row(i);
            let (mut s, mut k) = (0.0, 0usize);
            for (t, m) in model.trees.iter().zip(&masks) {
                if m[i] {
                    s += t.predict(row);
                    k += 1;
                }
            }
            (k > 0).then(|| {
                let e = s / k as f64 - ds.y[i];
                e * e
            })
        })
        .collect();
    let used: Vec<f64> = per_row.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::Data("no row has an out-of-bag tree".into()));
    }
    Ok(OobError {
        mse: used.iter().sum::<f64>() / used.len() as f64,
        n_used: used.len(),
        n_skipped: n - used.len(),
    })
}

/// Out-of-bag permutation importance: for every tree and feature, the rise in
/// the tree's OOB squared error when the feature is shuffled among that
/// tree's OOB rows, averaged over repeats and divided by the tree count.
/// Trees that never split on a feature contribute exactly 0 for it.
pub fn rf_variable_importance(model: &ForestModel, ds: &Dataset, repeats: usize, seed: u64) -> Result<Vec<f64>> {
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be >= 1".into()));
    }
    let p = ds.n_features();
    let masks = model.oob_masks(ds.n_rows())?;
    if !masks.iter().any(|m| m.iter().any(|&b| b)) {
        return Err(Error::Data("no row has an out-of-bag tree".into()));
    }
    let per_tree: Vec<Vec<f64>> = model
        .trees
        .par_iter()
        .zip(&masks)
        .enumerate()
        .map(|(t, (tree, mask))| {
            let oob: Vec<usize> = (0..ds.n_rows()).filter(|&i| mask[i]).collect();
            let mut out = vec![0.0; p];
            if oob.is_empty() {
                return out;
            }
            let base: Vec<f64> = oob.iter().map(|&i| tree.predict(ds.row(i))).collect();
            let b_o = oob.iter().zip(&base).map(|(&i, f)| (f - ds.y[i]).powi(2)).sum::<f64>() / oob.len() as f64;
            let tree_seed = sub_seed(seed, t as u64);
            let mut col = Vec::with_capacity(oob.len());
            for (j, slot) in out.iter_mut().enumerate() {
                if !tree.uses_feature(j) {
                    continue;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(tree_seed, j as u64));
                let mut acc = 0.0;
                for _ in 0..repeats {
                    col.clear();
                    col.extend(oob.iter().map(|&i| ds.get(i, j)));
                    col.shuffle(&mut rng);
                    let b_n = oob
                        .iter()
                        .zip(&col)
                        .map(|(&i, &v)| {
                            let row = ds.row(i);
                            let f = tree.predict_with(|k| if k == j { v } else { row[k] });
                            (f - ds.y[i]).powi(2)
                        })
                        .sum::<f64>()
                        / oob.len() as f64;
                    acc += b_n - b_o;
                }
                *slot = acc / repeats as f64;
            }
            out
        })
        .collect();
    let n = model.trees.len() as f64;
    Ok((0..p).map(|j| per_tree.iter().map(|v| v[j]).sum::<f64>() / n).collect())
}
