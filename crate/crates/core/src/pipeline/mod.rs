//! End-to-end orchestration: features, training with importance-driven
//! selection, full-raster prediction, evaluation, model comparison,
//! sensitivity sweeps and regional aggregation.

mod aggregate;
mod config;
mod eval;
mod stack_io;
pub mod synth;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, write_region_csv, RegionStats};
pub use config::{ImportanceConfig, PipelineConfig, SeedStream, SelectionConfig};
pub use eval::{compare_models, evaluate, BinMetrics, ComparisonRow, ComparisonTable, EvalReport, SixNumber};
pub use stack_io::{read_stack, write_stack, StackLayer, StackManifest};

use crate::error::{Error, Result};
use crate::explain::{
    consensus_select, permutation_importance, shapley_global, ConsensusRanking, ImportanceMethod, ImportanceReport,
    ReportMeta, ShapleyMode,
};
use crate::geometry::{read_footprints, read_regions, FootprintSet};
use crate::models::{
    fit_forest, rf_variable_importance, BoostParams, ForestParams, Model, ModelSpec, TrainedModel, TreeParams,
};
use crate::raster::{self, read_raster, window_median, write_raster, RasterGrid, RasterStack, DEFAULT_NODATA};
use crate::sampling::{assemble_samples, log_height, prepare_training, split_indices, Assembled, BinnedTable, HeightSource};
use crate::spectral::{build_feature_rasters, read_feature_dir, write_feature_dir, FeatureRasters};
use crate::stats;

/// Width of the LHeight intervals in evaluation breakdowns.
pub const EVAL_BIN_WIDTH: f64 = 1.0;

fn json_out<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn load_stacks(cfg: &PipelineConfig) -> Result<Vec<RasterStack>> {
    if cfg.stacks.is_empty() {
        return Err(Error::Config("no stack manifests configured".into()));
    }
    cfg.stacks.iter().map(read_stack).collect()
}

pub fn load_footprints(cfg: &PipelineConfig) -> Result<FootprintSet> {
    let path = cfg.footprints.as_ref().ok_or_else(|| Error::Config("no footprints configured".into()))?;
    read_footprints(path)
}

/// Reference heights: the nDSM when configured, else footprint attributes.
pub fn load_reference(cfg: &PipelineConfig) -> Result<Option<RasterGrid>> {
    cfg.ndsm.as_ref().map(read_raster).transpose()
}

fn height_source(ndsm: Option<&RasterGrid>) -> HeightSource<'_> {
    ndsm.map_or(HeightSource::Attribute, HeightSource::Raster)
}

/// Builds every recipe feature and writes them to `features_dir`.
pub fn cmd_features(cfg: &PipelineConfig) -> Result<FeatureRasters> {
    let stacks = load_stacks(cfg).map_err(|e| e.in_stage("features"))?;
    let fps = match &cfg.footprints {
        Some(p) => Some(read_footprints(p)?),
        None => None,
    };
    let features = build_feature_rasters(&stacks, &cfg.recipe, fps.as_ref()).map_err(|e| e.in_stage("features"))?;
    write_feature_dir(&features, &cfg.features_dir)?;
    log::info!("wrote {} feature rasters to {}", features.len(), cfg.features_dir.display());
    Ok(features)
}

/// Reads `features_dir` when it already holds every recipe feature, else builds it.
pub fn ensure_features(cfg: &PipelineConfig) -> Result<FeatureRasters> {
    if cfg.features_dir.join("manifest.json").exists() {
        let have = read_feature_dir(&cfg.features_dir)?;
        let wanted = cfg.recipe.feature_names();
        if wanted.iter().all(|n| have.get(n).is_some()) {
            return have.select(&wanted);
        }
    }
    cmd_features(cfg)
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub selection: ConsensusRanking,
    pub reports: Vec<ImportanceReport>,
    pub assembled: Assembled,
    pub binned: BinnedTable,
    /// Accuracy of the final model on its own binned training rows.
    pub training_eval: EvalReport,
}

/// Evenly spaced row indices, so a sample sorted by target spans its range.
fn spread_rows(n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    (0..k).map(|r| ((2 * r + 1) * n) / (2 * k)).collect()
}

/// Assemble, bin, rank features three ways, select by consensus and refit.
pub fn train_from(
    cfg: &PipelineConfig,
    features: &FeatureRasters,
    footprints: &FootprintSet,
    heights: HeightSource<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let assembled =
        assemble_samples(features, footprints, cfg.buffer_m, heights).map_err(|e| e.in_stage("assemble"))?;
    if !assembled.dropped.is_empty() {
        log::warn!("{} footprints dropped during assembly", assembled.dropped.len());
    }
    let binned = prepare_training(&assembled.table, cfg.clip[0], cfg.clip[1], cfg.bin_step)
        .map_err(|e| e.in_stage("prepare"))?;
    let ds = binned.table.dataset()?;
    if ds.n_rows() < 2 * cfg.forest.min_leaf {
        return Err(Error::Data(format!(
            "only {} binned rows; need at least {} for min_leaf {}",
            ds.n_rows(),
            2 * cfg.forest.min_leaf,
            cfg.forest.min_leaf
        ))
        .in_stage("prepare"));
    }

    let imp = &cfg.importance;
    let iseed = cfg.stream_seed(SeedStream::Importance);
    let reports = (|| -> Result<Vec<ImportanceReport>> {
        let full = fit_forest(
            &ds,
            ForestParams {
                n_trees: imp.trees,
                seed: iseed,
                ..cfg.forest
            },
        )?;
        let vi = rf_variable_importance(&full, &ds, imp.repeats, iseed)?;
        let vi = ImportanceReport::new(
            ImportanceMethod::RfVi,
            ds.names.clone(),
            vi,
            ReportMeta {
                repeats: imp.repeats,
                seed: iseed,
                background: 0,
            },
        )?;
        let perm = permutation_importance(&full, &ds, imp.repeats, iseed)?;
        let rows = ds.subset(&spread_rows(ds.n_rows(), imp.shapley_rows));
        let mut rng = ChaCha8Rng::seed_from_u64(iseed);
        let mut bg_idx = rand::seq::index::sample(&mut rng, ds.n_rows(), imp.shapley_background.min(ds.n_rows())).into_vec();
        bg_idx.sort_unstable();
        let shap = shapley_global(
            &full,
            &rows,
            &ds.subset(&bg_idx),
            ShapleyMode::Sampled {
                samples: imp.shapley_samples,
            },
            iseed,
        )?;
        Ok(vec![vi, perm, shap])
    })()
    .map_err(|e| e.in_stage("importance"))?;

    let k = cfg.selection.k.min(ds.n_features());
    let selection = consensus_select(&reports, k, Some(&cfg.selection.weights), &cfg.selection.overrides)
        .map_err(|e| e.in_stage("select"))?;
    // Keep the original column order so that k = all reproduces the full model.
    let chosen: Vec<String> = ds.names.iter().filter(|n| selection.selected.contains(n)).cloned().collect();
    let sel_ds = ds.select(&chosen)?;
    let forest = fit_forest(
        &sel_ds,
        ForestParams {
            seed: cfg.stream_seed(SeedStream::Train),
            ..cfg.forest
        },
    )
    .map_err(|e| e.in_stage("fit"))?;
    let model = TrainedModel::new(chosen, Model::Forest(forest))?;
    let fitted = model.predict_dataset(&sel_ds)?;
    let training_eval = evaluate(&sel_ds.y, &fitted, Some(EVAL_BIN_WIDTH))?;
    Ok(TrainOutcome {
        model,
        selection,
        reports,
        assembled,
        binned,
        training_eval,
    })
}

pub fn write_train_outputs(out: &TrainOutcome, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    out.model.save(dir.join("model.json"))?;
    out.selection.write_json(dir.join("selection.json"))?;
    for r in &out.reports {
        r.write_csv(dir.join(format!("importance_{}.csv", r.method.name())))?;
    }
    json_out(&out.training_eval, &dir.join("training_eval.json"))?;
    out.binned.table.write_csv(dir.join("samples.csv"))
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainOutcome> {
    let features = ensure_features(cfg)?;
    let fps = load_footprints(cfg)?;
    let ndsm = load_reference(cfg)?;
    let out = train_from(cfg, &features, &fps, height_source(ndsm.as_ref()))?;
    write_train_outputs(&out, &cfg.out_dir)?;
    log::info!(
        "trained on {} bins with {} selected features",
        out.binned.table.n_rows(),
        out.model.features.len()
    );
    Ok(out)
}

/// Per-pixel prediction in log space, smoothed by a `window_m` moving median
/// (0 disables it), mapped back to meters and masked to building pixels.
pub fn predict_raster(
    model: &TrainedModel,
    features: &FeatureRasters,
    footprints: Option<&FootprintSet>,
    window_m: f64,
    unmasked: bool,
) -> Result<RasterGrid> {
    let missing: Vec<&str> = model.features.iter().filter(|f| features.get(f).is_none()).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(Error::Lookup(format!("feature rasters missing for the model: {}", missing.join(", "))));
    }
    let grids: Vec<&RasterGrid> = model.features.iter().map(|f| features.get(f).unwrap()).collect();
    let geom = *grids[0].geometry();
    if window_m > 0.0 {
        raster::window_radius(window_m, geom.pixel_size)?;
    }
    let log_pred: Vec<Option<f64>> = (0..geom.len())
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(grids.len()),
            |row, i| {
                row.clear();
                for g in &grids {
                    row.push(g.valid_at(i)?);
                }
                model.predict(row).ok()
            },
        )
        .collect();
    let mut grid = RasterGrid::from_f64(geom, DEFAULT_NODATA, log_pred);
    if window_m > 0.0 {
        grid = window_median(&grid, window_m)?;
    }
    let mask: Option<Vec<bool>> = if unmasked {
        None
    } else {
        let fps = footprints.ok_or_else(|| Error::Config("masked prediction needs footprints".into()))?;
        let mut m = vec![false; geom.len()];
        for f in fps.iter() {
            for i in raster::rasterize_indices(&f.polygon, &geom) {
                m[i] = true;
            }
        }
        Some(m)
    };
    Ok(RasterGrid::from_f64(
        geom,
        DEFAULT_NODATA,
        (0..geom.len()).map(|i| {
            if mask.as_ref().is_some_and(|m| !m[i]) {
                None
            } else {
                grid.valid_at(i).map(f64::exp)
            }
        }),
    ))
}

pub fn cmd_predict(cfg: &PipelineConfig, model_path: &Path, unmasked: bool) -> Result<PathBuf> {
    let model = TrainedModel::load(model_path)?;
    let features = ensure_features(cfg)?;
    let fps = if unmasked { None } else { Some(load_footprints(cfg)?) };
    let pred = predict_raster(&model, &features, fps.as_ref(), cfg.window_m, unmasked).map_err(|e| e.in_stage("predict"))?;
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("height.bhgr");
    write_raster(&pred, &path)?;
    Ok(path)
}

/// Median of the prediction raster over each footprint's pixels, in meters.
pub fn object_predictions(pred: &RasterGrid, footprints: &FootprintSet) -> Vec<Option<f64>> {
    let geom = *pred.geometry();
    footprints
        .as_slice()
        .par_iter()
        .map(|f| {
            let mut v: Vec<f64> = raster::rasterize_indices(&f.polygon, &geom).into_iter().filter_map(|i| pred.valid_at(i)).collect();
            stats::median_in_place(&mut v)
        })
        .collect()
}

/// Per-building predicted and reference heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub id: String,
    pub predicted_m: f64,
    pub reference_m: f64,
}

/// Object-level accuracy in log space over buildings that have both a
/// prediction and a reference height.
pub fn evaluate_objects(
    pred: &RasterGrid,
    footprints: &FootprintSet,
    heights: HeightSource<'_>,
) -> Result<(EvalReport, Vec<ObjectRow>)> {
    let preds = object_predictions(pred, footprints);
    let rows: Vec<ObjectRow> = footprints
        .iter()
        .zip(preds)
        .filter_map(|(f, p)| {
            let r = match heights {
                HeightSource::Raster(n) => crate::sampling::reference_height(n, f).ok(),
                HeightSource::Attribute => f.ref_height_m,
                HeightSource::None => None,
            }?;
            Some(ObjectRow {
                id: f.id.clone(),
                predicted_m: p?,
                reference_m: r,
            })
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| log_height(r.reference_m)).collect();
    let yhat: Vec<f64> = rows.iter().map(|r| log_height(r.predicted_m)).collect();
    Ok((evaluate(&y, &yhat, Some(EVAL_BIN_WIDTH))?, rows))
}

pub fn cmd_evaluate(cfg: &PipelineConfig, prediction: &Path) -> Result<EvalReport> {
    let pred = read_raster(prediction)?;
    let fps = load_footprints(cfg)?;
    let ndsm = load_reference(cfg)?;
    let (report, rows) = evaluate_objects(&pred, &fps, height_source(ndsm.as_ref())).map_err(|e| e.in_stage("evaluate"))?;
    ensure_dir(&cfg.out_dir)?;
    json_out(&report, &cfg.out_dir.join("eval.json"))?;
    let path = cfg.out_dir.join("objects.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// Models of the comparison harness, keyed by label.
pub fn comparison_specs(cfg: &PipelineConfig) -> Vec<(String, ModelSpec)> {
    let forest = ModelSpec::Forest(ForestParams {
        seed: cfg.stream_seed(SeedStream::Compare),
        ..cfg.forest
    });
    let small_forest = ModelSpec::Forest(ForestParams {
        n_trees: cfg.importance.trees,
        seed: cfg.stream_seed(SeedStream::Compare),
        ..cfg.forest
    });
    let specs = vec![
        ModelSpec::Tree(TreeParams::default()),
        ModelSpec::Ols,
        forest,
        ModelSpec::Knn { k: 5 },
        ModelSpec::Boosted(BoostParams::default()),
        ModelSpec::Stacked {
            bases: vec![ModelSpec::Tree(TreeParams::default()), ModelSpec::Ols, small_forest, ModelSpec::Knn { k: 5 }],
            folds: 5,
            seed: cfg.stream_seed(SeedStream::Compare),
        },
    ];
    specs.into_iter().map(|s| (s.label().to_string(), s)).collect()
}

/// Compares models on the binned training table, restricted to the features
/// in `out_dir/selection.json` when a previous training run left one.
pub fn cmd_compare(cfg: &PipelineConfig, labels: &[String], n_splits: usize) -> Result<ComparisonTable> {
    let features = ensure_features(cfg)?;
    let fps = load_footprints(cfg)?;
    let ndsm = load_reference(cfg)?;
    let assembled = assemble_samples(&features, &fps, cfg.buffer_m, height_source(ndsm.as_ref()))
        .map_err(|e| e.in_stage("assemble"))?;
    let binned = prepare_training(&assembled.table, cfg.clip[0], cfg.clip[1], cfg.bin_step)
        .map_err(|e| e.in_stage("prepare"))?;
    let mut ds = binned.table.dataset()?;
    let sel_path = cfg.out_dir.join("selection.json");
    if sel_path.exists() {
        let text = std::fs::read_to_string(&sel_path).map_err(|e| Error::io(&sel_path, e))?;
        let doc: crate::explain::SelectionDoc = serde_json::from_str(&text)?;
        ds = ds.select(&doc.selected)?;
    }
    let all = comparison_specs(cfg);
    let specs: Vec<(String, ModelSpec)> = if labels.is_empty() {
        all
    } else {
        labels
            .iter()
            .map(|l| {
                all.iter()
                    .find(|(n, _)| n == l)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("unknown model {l:?}; expected one of single_tree, ols, random_forest, knn, boosting, stacking")))
            })
            .collect::<Result<_>>()?
    };
    let table = compare_models(&ds, &specs, n_splits, 0.3, cfg.stream_seed(SeedStream::Compare))?;
    ensure_dir(&cfg.out_dir)?;
    table.write_csv(cfg.out_dir.join("comparison.csv"))?;
    json_out(&table, &cfg.out_dir.join("comparison.json"))?;
    Ok(table)
}

/// One sweep setting: buffer and window both set to `value_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value_m: f64,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Trains on a fixed subset of footprints for every candidate and evaluates
/// on the rest. Rows are ranked by test R², failed candidates last.
pub fn sweep(
    cfg: &PipelineConfig,
    features: &FeatureRasters,
    footprints: &FootprintSet,
    heights: HeightSource<'_>,
    candidates: &[f64],
) -> Result<Vec<SweepRow>> {
    if candidates.is_empty() {
        return Err(Error::Parameter("sweep needs at least one candidate".into()));
    }
    let (_, mut te) = split_indices(footprints.len(), 0.3, cfg.stream_seed(SeedStream::Split))?;
    te.sort_unstable();
    let train_fp = footprints.filter(|i, _| te.binary_search(&i).is_err());
    let test_fp = footprints.filter(|i, _| te.binary_search(&i).is_ok());
    let mut rows: Vec<SweepRow> = candidates
        .iter()
        .map(|&c| {
            let run = || -> Result<EvalReport> {
                let setting = PipelineConfig {
                    buffer_m: c,
                    window_m: c,
                    ..cfg.clone()
                };
                let out = train_from(&setting, features, &train_fp, heights)?;
                let pred = predict_raster(&out.model, features, Some(&test_fp), c, false)?;
                Ok(evaluate_objects(&pred, &test_fp, heights)?.0)
            };
            match run() {
                Ok(r) => SweepRow {
                    value_m: c,
                    report: Some(r),
                    error: None,
                },
                Err(e) => SweepRow {
                    value_m: c,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let key = |r: &SweepRow| r.report.as_ref().and_then(|r| r.r2).unwrap_or(f64::NEG_INFINITY);
    rows.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.value_m.total_cmp(&b.value_m)));
    Ok(rows)
}

pub fn cmd_sweep(cfg: &PipelineConfig, candidates: &[f64]) -> Result<Vec<SweepRow>> {
    let features = ensure_features(cfg)?;
    let fps = load_footprints(cfg)?;
    let ndsm = load_reference(cfg)?;
    let rows = sweep(cfg, &features, &fps, height_source(ndsm.as_ref()), candidates)?;
    ensure_dir(&cfg.out_dir)?;
    json_out(&rows, &cfg.out_dir.join("sweep.json"))?;
    Ok(rows)
}

pub fn cmd_aggregate(cfg: &PipelineConfig, prediction: &Path) -> Result<Vec<RegionStats>> {
    let regions_path = cfg.regions.as_ref().ok_or_else(|| Error::Config("no regions configured".into()))?;
    let regions = read_regions(regions_path)?;
    let fps = load_footprints(cfg)?;
    let pred = read_raster(prediction)?;
    let stats = aggregate(&fps, &object_predictions(&pred, &fps), &regions)?;
    ensure_dir(&cfg.out_dir)?;
    write_region_csv(&stats, cfg.out_dir.join("regions.csv"))?;
    Ok(stats)
}
