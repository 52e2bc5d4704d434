//! End-to-end behaviour of the pipeline on small synthetic cities.

mod common;

use bheight::geometry::{polygon_area, Polygon, Region};
use bheight::models::{fit_forest, ForestParams, Model};
use bheight::pipeline::synth::{synth_generate, write_city, SynthCity, SynthParams, INFORMATIVE_SIGNALS};
use bheight::pipeline::{
    self, aggregate, evaluate_objects, predict_raster, sweep, train_from, ImportanceConfig, PipelineConfig, SeedStream,
};
use bheight::raster::{rasterize, RasterGrid};
use bheight::sampling::HeightSource;
use bheight::spectral::{build_feature_rasters, FeatureRasters, FeatureRecipe};
use bheight::{stats, ErrorClass};

fn small_city(seed: u64) -> SynthCity {
    synth_generate(&SynthParams {
        seed,
        size: 128,
        n_buildings: 110,
        ..Default::default()
    })
    .unwrap()
}

fn features(city: &SynthCity) -> FeatureRasters {
    build_feature_rasters(std::slice::from_ref(&city.stack), &FeatureRecipe::default(), Some(&city.footprints)).unwrap()
}

fn quick_config() -> PipelineConfig {
    PipelineConfig {
        forest: ForestParams {
            n_trees: 60,
            ..Default::default()
        },
        importance: ImportanceConfig {
            trees: 30,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn synth_is_deterministic_and_disjoint() {
    let a = small_city(4);
    let b = small_city(4);
    assert_eq!(a.ndsm, b.ndsm);
    assert_eq!(a.footprints, b.footprints);
    assert_eq!(a.stack.layers(), b.stack.layers());
    assert_ne!(small_city(5).ndsm, a.ndsm);
    // Footprints do not share pixels.
    let g = *a.ndsm.geometry();
    let mut owner = vec![usize::MAX; g.len()];
    for (k, f) in a.footprints.iter().enumerate() {
        for i in rasterize(&f.polygon, &g).indices() {
            assert_eq!(owner[i], usize::MAX, "pixel {i} claimed twice");
            owner[i] = k;
        }
    }
}

#[test]
fn informative_signals_track_height() {
    let city = synth_generate(&SynthParams { seed: 1, ..Default::default() }).unwrap();
    let lh: Vec<f64> = city.truth.iter().map(|t| t.ln_height).collect();
    for (j, name) in INFORMATIVE_SIGNALS.iter().enumerate() {
        let s: Vec<f64> = city.truth.iter().map(|t| t.signals[j]).collect();
        let rho = stats::spearman(&s, &lh);
        assert!(rho >= 0.8, "{name}: rank correlation {rho}");
    }
}

#[test]
fn selecting_every_feature_reproduces_the_full_model() {
    let city = small_city(6);
    let f = features(&city);
    let mut cfg = quick_config();
    cfg.selection.k = 10_000;
    let out = train_from(&cfg, &f, &city.footprints, HeightSource::Raster(&city.ndsm)).unwrap();
    let ds = out.binned.table.dataset().unwrap();
    assert_eq!(out.model.features, ds.names);
    let direct = fit_forest(
        &ds,
        ForestParams {
            seed: cfg.stream_seed(SeedStream::Train),
            ..cfg.forest
        },
    )
    .unwrap();
    assert_eq!(out.model.model, Model::Forest(direct));
}

#[test]
fn training_is_reproducible_and_predicts_held_out_city() {
    let (a, b) = (small_city(1), small_city(2));
    let (fa, fb) = (features(&a), features(&b));
    let cfg = quick_config();
    let one = train_from(&cfg, &fa, &a.footprints, HeightSource::Raster(&a.ndsm)).unwrap();
    let two = train_from(&cfg, &fa, &a.footprints, HeightSource::Raster(&a.ndsm)).unwrap();
    assert_eq!(one.model.to_json().unwrap(), two.model.to_json().unwrap());
    assert_eq!(one.model.features.len(), 13);
    let pred = predict_raster(&one.model, &fb, Some(&b.footprints), cfg.window_m, false).unwrap();
    let (rep, rows) = evaluate_objects(&pred, &b.footprints, HeightSource::Raster(&b.ndsm)).unwrap();
    assert_eq!(rows.len(), rep.n);
    assert!(rep.r2.unwrap() > 0.5, "held-out R² {:?}", rep.r2);
}

#[test]
fn prediction_is_masked_to_footprints() {
    let city = small_city(3);
    let f = features(&city);
    let out = train_from(&quick_config(), &f, &city.footprints, HeightSource::Raster(&city.ndsm)).unwrap();
    let g = *city.ndsm.geometry();
    let mut on_building = vec![false; g.len()];
    for fp in city.footprints.iter() {
        for i in rasterize(&fp.polygon, &g).indices() {
            on_building[i] = true;
        }
    }
    let masked = predict_raster(&out.model, &f, Some(&city.footprints), 0.0, false).unwrap();
    let unmasked = predict_raster(&out.model, &f, Some(&city.footprints), 0.0, true).unwrap();
    for i in 0..g.len() {
        assert_eq!(masked.valid_at(i).is_some(), on_building[i] && unmasked.valid_at(i).is_some());
        if let Some(h) = unmasked.valid_at(i) {
            assert!(h >= 1.0 - 1e-6, "height {h} below the log floor");
        }
    }
}

#[test]
fn missing_feature_is_a_lookup_error() {
    let city = small_city(3);
    let f = features(&city);
    let out = train_from(&quick_config(), &f, &city.footprints, HeightSource::Raster(&city.ndsm)).unwrap();
    let fewer = f.select(&f.names()[..2].to_vec()).unwrap();
    let err = predict_raster(&out.model, &fewer, None, 0.0, true).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Data);
    assert!(err.to_string().contains(&out.model.features[0]) || err.to_string().contains("missing"));
}

#[test]
fn perfect_prediction_scores_one() {
    let city = small_city(7);
    let (rep, rows) = evaluate_objects(&city.ndsm, &city.footprints, HeightSource::Raster(&city.ndsm)).unwrap();
    assert_eq!(rep.r2, Some(1.0));
    assert_eq!(rep.mse, 0.0);
    assert!(rows.iter().all(|r| r.predicted_m == r.reference_m));
}

#[test]
fn sweep_isolates_failing_candidates() {
    let city = small_city(8);
    let f = features(&city);
    let rows = sweep(&quick_config(), &f, &city.footprints, HeightSource::Raster(&city.ndsm), &[5.0, 30.0, 50.0]).unwrap();
    assert_eq!(rows.len(), 3);
    // A 5 m window is smaller than a 10 m pixel and fails; the others still run.
    let last = rows.last().unwrap();
    assert_eq!(last.value_m, 5.0);
    assert!(last.report.is_none() && last.error.is_some());
    assert!(rows[..2].iter().all(|r| r.report.is_some()));
    let r2: Vec<f64> = rows[..2].iter().map(|r| r.report.as_ref().unwrap().r2.unwrap()).collect();
    assert!(r2[0] >= r2[1]);
}

#[test]
fn aggregate_partitions_buildings_across_quadrants() {
    let city = small_city(9);
    let heights: Vec<Option<f64>> = city.footprints.iter().map(|f| bheight::sampling::reference_height(&city.ndsm, f).ok()).collect();
    let stats = aggregate(&city.footprints, &heights, &city.regions).unwrap();
    assert_eq!(stats.len(), 4);
    assert_eq!(stats.iter().map(|s| s.count).sum::<usize>(), city.footprints.len());
    let total: f64 = city.footprints.iter().map(|f| polygon_area(&f.polygon)).sum();
    assert!((stats.iter().map(|s| s.footprint_area_m2).sum::<f64>() - total).abs() < 1e-6 * total);
    let outside = Region {
        id: "far".into(),
        polygon: Polygon::rect(1e7, 1e7, 1e7 + 10.0, 1e7 + 10.0).unwrap(),
    };
    let empty = aggregate(&city.footprints, &heights, &[outside]).unwrap();
    assert_eq!((empty[0].count, empty[0].mean_height_m, empty[0].built_ratio), (0, None, 0.0));
}

#[test]
fn commands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let city = small_city(10);
    let mut cfg = write_city(&city, dir.path()).unwrap();
    cfg.forest.n_trees = 40;
    cfg.importance.trees = 20;
    pipeline::cmd_features(&cfg).unwrap();
    let trained = pipeline::cmd_train(&cfg).unwrap();
    for name in ["model.json", "selection.json", "importance_rf_vi.csv", "importance_permutation.csv", "importance_shapley.csv", "training_eval.json", "samples.csv"] {
        assert!(cfg.out_dir.join(name).is_file(), "{name} missing");
    }
    let raster = pipeline::cmd_predict(&cfg, &cfg.out_dir.join("model.json"), false).unwrap();
    let eval = pipeline::cmd_evaluate(&cfg, &raster).unwrap();
    assert!(eval.n > 0);
    let regions = pipeline::cmd_aggregate(&cfg, &raster).unwrap();
    assert_eq!(regions.len(), 4);
    let table = pipeline::cmd_compare(&cfg, &["ols".to_string(), "single_tree".to_string()], 3).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].per_split.len(), 3);
    assert!(cfg.out_dir.join("comparison.csv").is_file());
    assert!(pipeline::cmd_compare(&cfg, &["nope".to_string()], 3).unwrap_err().class() == ErrorClass::Config);
    let loaded = bheight::models::TrainedModel::load(cfg.out_dir.join("model.json")).unwrap();
    assert_eq!(loaded, trained.model);
    let back = PipelineConfig::load(dir.path().join("config.json")).unwrap();
    assert_eq!(back.buffer_m, 50.0);
    let r: RasterGrid = bheight::raster::read_raster(&raster).unwrap();
    assert_eq!(r.geometry(), city.ndsm.geometry());
}
