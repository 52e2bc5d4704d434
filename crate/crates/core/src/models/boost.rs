use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_to, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::sampling::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_stages: usize,
    pub shrinkage: f64,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_stages: 200,
            shrinkage: 0.1,
            max_depth: Some(3),
            min_leaf: 5,
        }
    }
}

/// `init + sum_k shrinkage[k] * trees[k](x)`, squared loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub params: BoostParams,
    pub init: f64,
    pub trees: Vec<Tree>,
    pub shrinkage: Vec<f64>,
}

impl BoostedModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().zip(&self.shrinkage).fold(self.init, |acc, (t, s)| acc + s * t.predict(row))
    }
}

/// Stagewise residual fitting: each stage grows a depth-limited tree on the
/// current residuals and adds its shrunken prediction.
pub fn fit_boosted(ds: &Dataset, params: BoostParams) -> Result<BoostedModel> {
    if params.n_stages == 0 {
        return Err(Error::Parameter("n_stages must be >= 1".into()));
    }
    if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
        return Err(Error::Parameter(format!("shrinkage must be in (0, 1], got {}", params.shrinkage)));
    }
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::Data("boosting on empty data".into()));
    }
    let init = ds.y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![init; n];
    let tp = TreeParams {
        min_leaf: params.min_leaf,
        max_depth: params.max_depth,
    };
    let mut trees = Vec::with_capacity(params.n_stages);
    let mut resid = vec![0.0; n];
    for _ in 0..params.n_stages {
        for i in 0..n {
            resid[i] = ds.y[i] - fitted[i];
        }
        let tree = fit_tree_to(ds, &resid, tp)?;
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += params.shrinkage * tree.predict(ds.row(i));
        }
        trees.push(tree);
    }
    Ok(BoostedModel {
        params,
        init,
        shrinkage: vec![params.shrinkage; trees.len()],
        trees,
    })
}
