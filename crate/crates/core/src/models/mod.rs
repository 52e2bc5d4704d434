//! Regression models: CART, random forest with out-of-bag bookkeeping,
//! gradient boosting, stacking, and linear / nearest-neighbour baselines.

mod boost;
mod forest;
mod linear;
mod stack;
mod tree;

pub use boost::{fit_boosted, BoostParams, BoostedModel};
pub use forest::{
    fit_forest, fit_forest_with, oob_error, rf_variable_importance, splitmix64, sub_seed, Bootstrap, ForestModel,
    ForestParams, OobError,
};
pub use linear::{fit_knn, fit_ols, knn_predict, least_squares, KnnModel, LinearModel, OLS_RIDGE};
pub use stack::{fit_stacked, fold_assignment, StackedModel, META_RIDGE};
pub use tree::{best_split, fit_tree, split_threshold, Node, Split, Tree, TreeParams, GAIN_TIE};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{Dataset, FeatureTable};

/// Anything that maps a feature row to a prediction.
pub trait Regressor: Sync {
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict_all(&self, ds: &Dataset) -> Vec<f64> {
        (0..ds.n_rows()).into_par_iter().map(|i| self.predict_row(ds.row(i))).collect()
    }
}

/// Adapts a closure into a [`Regressor`].
pub struct FnRegressor<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Regressor for FnRegressor<F> {
    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.0)(row)
    }
}

impl Regressor for Tree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict(row)
    }
}

impl Regressor for ForestModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict(row)
    }
}

/// Single CART tree; stored as a one-element list to share the forest layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Boosted(BoostedModel),
    Stacked(StackedModel),
    Ols(LinearModel),
    Knn(KnnModel),
}

impl Regressor for Model {
    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Tree(m) => m.trees[0].predict(row),
            Model::Forest(m) => m.predict(row),
            Model::Boosted(m) => m.predict(row),
            Model::Stacked(m) => m.predict(row),
            Model::Ols(m) => m.predict(row),
            Model::Knn(m) => m.predict(row),
        }
    }
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Tree(_) => "tree",
            Model::Forest(_) => "forest",
            Model::Boosted(_) => "boosted",
            Model::Stacked(_) => "stacked",
            Model::Ols(_) => "ols",
            Model::Knn(_) => "knn",
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let trees = match self {
            Model::Tree(m) => {
                if m.trees.len() != 1 {
                    return Err(Error::Validation("tree model must hold exactly one tree".into()));
                }
                &m.trees
            }
            Model::Forest(m) => {
                if m.trees.is_empty() || m.bootstrap.len() != m.trees.len() {
                    return Err(Error::Validation("forest needs one bootstrap list per tree".into()));
                }
                &m.trees
            }
            Model::Boosted(m) => {
                if m.shrinkage.len() != m.trees.len() {
                    return Err(Error::Validation("boosted model needs one shrinkage per stage".into()));
                }
                &m.trees
            }
            Model::Stacked(m) => {
                if m.meta.coef.len() != m.bases.len() {
                    return Err(Error::Validation("meta-model width differs from base count".into()));
                }
                return m.bases.iter().try_for_each(|b| b.validate(p));
            }
            Model::Ols(m) => {
                return if m.coef.len() == p {
                    Ok(())
                } else {
                    Err(Error::Shape {
                        expected: p,
                        got: m.coef.len(),
                    })
                };
            }
            Model::Knn(m) => {
                return if m.mean.len() == p && m.x.len() == m.y.len() * p && m.k >= 1 && m.k <= m.y.len() {
                    Ok(())
                } else {
                    Err(Error::Validation("malformed KNN model".into()))
                };
            }
        };
        trees.iter().try_for_each(|t| t.validate(p))
    }
}

/// What to fit; used by stacking and the comparison harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Boosted(BoostParams),
    Stacked {
        bases: Vec<ModelSpec>,
        folds: usize,
        seed: u64,
    },
    Ols,
    Knn {
        k: usize,
    },
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Tree(_) => "single_tree",
            ModelSpec::Forest(_) => "random_forest",
            ModelSpec::Boosted(_) => "boosting",
            ModelSpec::Stacked { .. } => "stacking",
            ModelSpec::Ols => "ols",
            ModelSpec::Knn { .. } => "knn",
        }
    }
}

pub fn fit_model(spec: &ModelSpec, ds: &Dataset) -> Result<Model> {
    Ok(match spec {
        ModelSpec::Tree(p) => Model::Tree(TreeModel {
            params: *p,
            trees: vec![fit_tree(ds, *p)?],
        }),
        ModelSpec::Forest(p) => Model::Forest(fit_forest(ds, *p)?),
        ModelSpec::Boosted(p) => Model::Boosted(fit_boosted(ds, *p)?),
        ModelSpec::Stacked { bases, folds, seed } => Model::Stacked(fit_stacked(ds, bases, *folds, *seed)?),
        ModelSpec::Ols => Model::Ols(fit_ols(ds)?),
        ModelSpec::Knn { k } => Model::Knn(fit_knn(ds, *k)?),
    })
}

pub const MODEL_FORMAT: &str = "bhmodel/1";

/// A fitted model together with the ordered feature names it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub features: Vec<String>,
    #[serde(flatten)]
    pub model: Model,
}

impl Regressor for TrainedModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.model.predict_row(row)
    }
}

impl TrainedModel {
    pub fn new(features: Vec<String>, model: Model) -> Result<Self> {
        model.validate(features.len())?;
        Ok(TrainedModel {
            format: MODEL_FORMAT.into(),
            features,
            model,
        })
    }

    pub fn fit(spec: &ModelSpec, ds: &Dataset) -> Result<Self> {
        TrainedModel::new(ds.names.clone(), fit_model(spec, ds)?)
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.features.len() {
            return Err(Error::Shape {
                expected: self.features.len(),
                got: row.len(),
            });
        }
        Ok(self.model.predict_row(row))
    }

    /// Predict every row, matching columns by name.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.names == self.features {
            return Ok(self.model.predict_all(ds));
        }
        Ok(self.model.predict_all(&ds.select(&self.features)?))
    }

    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let idx: Vec<usize> = self
            .features
            .iter()
            .map(|f| table.column_index(f).ok_or_else(|| Error::Data(format!("table lacks feature {f}"))))
            .collect::<Result<_>>()?;
        Ok((0..table.n_rows())
            .into_par_iter()
            .map(|i| {
                let r = table.row(i);
                let row: Vec<f64> = idx.iter().map(|&j| r[j]).collect();
                self.model.predict_row(&row)
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT {
            return Err(Error::Data(format!("unsupported model format {:?}", m.format)));
        }
        m.model.validate(m.features.len())?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainedModel::from_json(&text)
    }
}
