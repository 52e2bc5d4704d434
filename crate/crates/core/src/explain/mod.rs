//! Model-agnostic feature importance (permutation and Shapley) and the
//! rank-fusion step that turns several importance reports into a selection.

mod shapley;

pub use shapley::{shapley_global, shapley_values, ShapleyMode, ShapleyResult, MAX_EXACT_FEATURES};

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{sub_seed, Regressor};
use crate::sampling::Dataset;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    RfVi,
    Permutation,
    Shapley,
}

impl ImportanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ImportanceMethod::RfVi => "rf_vi",
            ImportanceMethod::Permutation => "permutation",
            ImportanceMethod::Shapley => "shapley",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub repeats: usize,
    pub seed: u64,
    pub background: usize,
}

/// Per-feature scores with 1-based ranks (highest score first, ties by name).
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub features: Vec<String>,
    pub scores: Vec<f64>,
    pub rank: Vec<usize>,
    pub meta: ReportMeta,
}

impl ImportanceReport {
    pub fn new(method: ImportanceMethod, features: Vec<String>, scores: Vec<f64>, meta: ReportMeta) -> Result<Self> {
        if features.len() != scores.len() {
            return Err(Error::Shape {
                expected: features.len(),
                got: scores.len(),
            });
        }
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| features[a].cmp(&features[b])));
        let mut rank = vec![0; features.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r + 1;
        }
        Ok(ImportanceReport {
            method,
            features,
            scores,
            rank,
            meta,
        })
    }

    /// Feature names from rank 1 downwards.
    pub fn ranked(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by_key(|&i| self.rank[i]);
        idx.into_iter().map(|i| self.features[i].as_str()).collect()
    }

    pub fn score_of(&self, feature: &str) -> Option<f64> {
        self.features.iter().position(|f| f == feature).map(|i| self.scores[i])
    }

    /// CSV with header `feature,score,rank`, rows in rank order.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["feature", "score", "rank"])?;
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by_key(|&i| self.rank[i]);
        for i in idx {
            w.write_record([self.features[i].clone(), self.scores[i].to_string(), self.rank[i].to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Mean rise in squared error when one column is shuffled: for every
/// feature and repeat, `e_perm - e_orig`, averaged over repeats. A feature
/// the model ignores scores exactly 0.
pub fn permutation_importance<M: Regressor + ?Sized>(
    model: &M,
    ds: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be >= 1".into()));
    }
    if ds.n_rows() == 0 {
        return Err(Error::Data("permutation importance on an empty table".into()));
    }
    let p = ds.n_features();
    let n = ds.n_rows();
    let base: Vec<f64> = (0..n).map(|i| model.predict_row(ds.row(i))).collect();
    let e_orig = stats::mse(&ds.y, &base);
    let scores: Vec<f64> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, j as u64));
            let mut col = ds.column(j);
            let mut row = vec![0.0; p];
            let mut acc = 0.0;
            for _ in 0..repeats {
                col.shuffle(&mut rng);
                let pred: Vec<f64> = (0..n)
                    .map(|i| {
                        row.copy_from_slice(ds.row(i));
                        row[j] = col[i];
                        model.predict_row(&row)
                    })
                    .collect();
                acc += stats::mse(&ds.y, &pred) - e_orig;
            }
            acc / repeats as f64
        })
        .collect();
    ImportanceReport::new(
        ImportanceMethod::Permutation,
        ds.names.clone(),
        scores,
        ReportMeta {
            repeats,
            seed,
            background: 0,
        },
    )
}

/// Borda fusion of several reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRanking {
    /// All features, best first.
    pub order: Vec<String>,
    /// Fused score for each entry of `order`.
    pub fused: Vec<f64>,
    pub selected: Vec<String>,
    pub forced: Vec<String>,
    pub weights: Vec<f64>,
    pub methods: Vec<ImportanceMethod>,
    pub k: usize,
}

/// Each method awards `n - rank + 1` points, scaled by its weight; the `k`
/// best fused scores are selected (ties by mean rank, then name). Features in
/// `forced` are placed first and count toward `k`.
pub fn consensus_select(
    reports: &[ImportanceReport],
    k: usize,
    weights: Option<&[f64]>,
    forced: &[String],
) -> Result<ConsensusRanking> {
    let first = reports.first().ok_or_else(|| Error::Parameter("consensus needs at least one report".into()))?;
    let names: BTreeSet<&str> = first.features.iter().map(String::as_str).collect();
    for r in &reports[1..] {
        let other: BTreeSet<&str> = r.features.iter().map(String::as_str).collect();
        if other != names {
            let diff: Vec<&str> = names.symmetric_difference(&other).copied().collect();
            return Err(Error::Data(format!("reports cover different features: {diff:?}")));
        }
    }
    let n = first.features.len();
    if k > n {
        return Err(Error::Parameter(format!("k = {k} exceeds feature count {n}")));
    }
    let weights: Vec<f64> = match weights {
        Some(w) if w.len() != reports.len() => {
            return Err(Error::Parameter(format!("{} weights for {} reports", w.len(), reports.len())))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; reports.len()],
    };
    if let Some(f) = forced.iter().find(|f| !names.contains(f.as_str())) {
        return Err(Error::Parameter(format!("forced feature {f} is not in the reports")));
    }
    let forced: Vec<String> = forced.iter().fold(Vec::new(), |mut acc, f| {
        if !acc.contains(f) {
            acc.push(f.clone());
        }
        acc
    });
    if forced.len() > k {
        return Err(Error::Parameter(format!("{} forced features exceed k = {k}", forced.len())));
    }

    let feats: Vec<&str> = names.iter().copied().collect();
    let mut fused = vec![0.0; n];
    let mut mean_rank = vec![0.0; n];
    for (r, w) in reports.iter().zip(&weights) {
        for (i, f) in r.features.iter().enumerate() {
            let slot = feats.binary_search(&f.as_str()).unwrap();
            fused[slot] += w * (n - r.rank[i] + 1) as f64;
            mean_rank[slot] += r.rank[i] as f64 / reports.len() as f64;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        fused[b]
            .total_cmp(&fused[a])
            .then(mean_rank[a].total_cmp(&mean_rank[b]))
            .then_with(|| feats[a].cmp(feats[b]))
    });
    let order: Vec<String> = idx.iter().map(|&i| feats[i].to_string()).collect();
    let mut selected = forced.clone();
    for f in &order {
        if selected.len() >= k {
            break;
        }
        if !selected.contains(f) {
            selected.push(f.clone());
        }
    }
    Ok(ConsensusRanking {
        fused: idx.iter().map(|&i| fused[i]).collect(),
        order,
        selected,
        forced,
        weights,
        methods: reports.iter().map(|r| r.method).collect(),
        k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDoc {
    pub methods: Vec<String>,
    pub weights: Vec<f64>,
    pub k: usize,
    pub selected: Vec<String>,
    pub forced: Vec<String>,
}

impl ConsensusRanking {
    pub fn to_doc(&self) -> SelectionDoc {
        SelectionDoc {
            methods: self.methods.iter().map(|m| m.name().to_string()).collect(),
            weights: self.weights.clone(),
            k: self.k,
            selected: self.selected.clone(),
            forced: self.forced.clone(),
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(&self.to_doc())?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnRegressor;

    fn report(method: ImportanceMethod, scores: &[f64]) -> ImportanceReport {
        let names = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        ImportanceReport::new(method, names, scores.to_vec(), ReportMeta::default()).unwrap()
    }

    #[test]
    fn ranks_break_ties_by_name() {
        let r = report(ImportanceMethod::RfVi, &[1.0, 3.0, 3.0, 0.0, 2.0]);
        assert_eq!(r.rank, vec![4, 1, 2, 5, 3]);
        assert_eq!(r.ranked(), vec!["b", "c", "e", "a", "d"]);
    }

    #[test]
    fn hand_borda() {
        // ranks: r1 a1 b2 c3 d4 e5; r2 b1 a2 c3 e4 d5; r3 c1 b2 a3 d4 e5
        let r1 = report(ImportanceMethod::RfVi, &[5.0, 4.0, 3.0, 2.0, 1.0]);
        let r2 = report(ImportanceMethod::Permutation, &[4.0, 5.0, 3.0, 1.0, 2.0]);
        let r3 = report(ImportanceMethod::Shapley, &[3.0, 4.0, 5.0, 2.0, 1.0]);
        let c = consensus_select(&[r1, r2, r3], 3, None, &[]).unwrap();
        // points a 5+4+3=12, b 4+5+4=13, c 3+3+5=11, d 2+1+2=5, e 1+2+1=4
        assert_eq!(c.order, vec!["b", "a", "c", "d", "e"]);
        assert_eq!(c.fused, vec![13.0, 12.0, 11.0, 5.0, 4.0]);
        assert_eq!(c.selected, vec!["b", "a", "c"]);
    }

    #[test]
    fn forced_and_errors() {
        let r1 = report(ImportanceMethod::RfVi, &[5.0, 4.0, 3.0, 2.0, 1.0]);
        let c = consensus_select(std::slice::from_ref(&r1), 2, None, &["e".into()]).unwrap();
        assert_eq!(c.selected, vec!["e", "a"]);
        assert!(consensus_select(std::slice::from_ref(&r1), 6, None, &[]).is_err());
        let other = ImportanceReport::new(ImportanceMethod::Shapley, vec!["a".into(), "z".into()], vec![1.0, 2.0], ReportMeta::default()).unwrap();
        let err = consensus_select(&[r1, other], 1, None, &[]).unwrap_err().to_string();
        assert!(err.contains('z'), "{err}");
    }

    #[test]
    fn permutation_ignored_feature_is_zero() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let y = rows.iter().map(|r| r[0]).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        let m = FnRegressor(|r: &[f64]| r[0]);
        let rep = permutation_importance(&m, &ds, 5, 3).unwrap();
        assert_eq!(rep.scores[1], 0.0);
        assert!(rep.scores[0] > 100.0);
        assert_eq!(rep.ranked()[0], "x0");
    }
}
