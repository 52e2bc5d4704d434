//! Library routines against brute-force references on random inputs.

mod common;

use bheight::explain::{permutation_importance, shapley_values, ShapleyMode};
use bheight::geometry::{min_bounding_rect, NearIndex, Point, Polygon};
use bheight::models::{fit_forest, fit_tree, rf_variable_importance, ForestParams, FnRegressor, TreeParams};
use bheight::raster::{buffer_mask, percentile_clip_mask, rasterize, window_median, GridGeometry, MaskGrid};
use bheight::sampling::Dataset;
use bheight::spectral::{normalized_difference, temporal_stats, StatKind};
use bheight::stats;
use proptest::prelude::*;
use rand::Rng;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn window_median_matches_brute_force(seed in 0u64..1000, rows in 1usize..20, cols in 1usize..20, k in 1usize..6, holes in 0.0f64..0.6) {
        let g = random_grid(rows, cols, holes, seed);
        let w = 10.0 * k as f64;
        let lib = window_median(&g, w).unwrap();
        let brute = window_median_brute(&g, w);
        for (a, b) in lib.values().iter().zip(&brute) {
            prop_assert_eq!(a.to_bits(), b.map_or(g.nodata(), |v| v as f32).to_bits());
        }
    }

    #[test]
    fn rasterize_matches_point_in_polygon(seed in 0u64..1000, cx in -20.0f64..220.0, cy in -20.0f64..220.0, rad in 1.0f64..90.0) {
        let geom = GridGeometry::new(20, 20, 0.0, 200.0, 10.0).unwrap();
        let poly = random_convex(&mut rng(seed), cx, cy, rad);
        let lib = rasterize(&poly, &geom);
        prop_assert_eq!(lib.bits().to_vec(), rasterize_brute(&poly, &geom));
    }

    #[test]
    fn buffer_matches_all_pairs(seed in 0u64..1000, d in 0.0f64..45.0) {
        let geom = GridGeometry::new(16, 16, 0.0, 160.0, 10.0).unwrap();
        let mut r = rng(seed);
        let mask = MaskGrid::from_bits(geom, (0..geom.len()).map(|_| r.gen::<f64>() < 0.03).collect()).unwrap();
        let lib = buffer_mask(&mask, d).unwrap();
        prop_assert_eq!(lib.bits().to_vec(), buffer_brute(&mask, d));
    }
}

#[test]
fn rasterize_concave_with_hole() {
    let geom = GridGeometry::new(30, 30, 0.0, 300.0, 10.0).unwrap();
    let star: Vec<Point> = (0..14)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 14.0;
            let r = if i % 2 == 0 { 130.0 } else { 55.0 };
            Point::new(150.0 + r * a.cos(), 150.0 + r * a.sin())
        })
        .collect();
    let hole = vec![Point::new(140.0, 140.0), Point::new(160.0, 140.0), Point::new(160.0, 160.0), Point::new(140.0, 160.0)];
    let poly = Polygon::new(star, vec![hole]).unwrap();
    let lib = rasterize(&poly, &geom);
    assert_eq!(lib.bits(), rasterize_brute(&poly, &geom).as_slice());
    assert!(!lib.get(15, 15));
}

#[test]
fn rasterize_boundary_centers_are_half_open() {
    let geom = GridGeometry::new(10, 10, 0.0, 100.0, 10.0).unwrap();
    // Edges pass exactly through pixel centers at x = 25, 65 and y = 35, 75.
    let m = rasterize(&Polygon::rect(25.0, 35.0, 65.0, 75.0).unwrap(), &geom);
    assert_eq!(m.bits(), rasterize_brute(&Polygon::rect(25.0, 35.0, 65.0, 75.0).unwrap(), &geom).as_slice());
    // Left and top edges are in, right and bottom edges out: 4 columns by 4 rows.
    assert_eq!(m.count(), 16);
}

#[test]
fn near_distance_matches_all_pairs() {
    let set = random_squares(120, 10.0, 300.0, 3);
    let brute = near_brute(&set);
    assert_eq!(NearIndex::from_footprints(set.as_slice()).all_nearest(), brute);
}

#[test]
fn segment_distance_matches_reference() {
    let mut r = rng(4);
    for _ in 0..5000 {
        let mut p = || Point::new(r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
        let (a, b, c, d) = (p(), p(), p(), p());
        assert_eq!(
            bheight::geometry::segment_distance(a, b, c, d).to_bits(),
            segment_distance_brute(a, b, c, d).to_bits()
        );
    }
}

#[test]
fn tree_splits_match_exhaustive_scan() {
    for seed in 0..6u64 {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..150).map(|_| vec![r.gen_range(0..8) as f64, r.gen(), r.gen(), r.gen_range(0..2) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|x| x[0] * 0.5 + (5.0 * x[1]).cos() + x[3] + 0.1 * gauss(&mut r)).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        for min_leaf in [1, 3, 7] {
            let tree = fit_tree(&ds, TreeParams { min_leaf, max_depth: None }).unwrap();
            check_tree_against_oracle(&tree, &ds, min_leaf).unwrap();
        }
    }
}

#[test]
fn depth_limited_tree_stops() {
    let ds = nonlinear_dataset(200, 4, 0.1, 1);
    let t = fit_tree(&ds, TreeParams { min_leaf: 2, max_depth: Some(3) }).unwrap();
    assert!(t.depth() <= 3);
    assert!(t.leaves().all(|n| n.n >= 2));
}

#[test]
fn min_bounding_rect_of_known_shapes() {
    let r = min_bounding_rect(&Polygon::rect(0.0, 0.0, 40.0, 10.0).unwrap()).unwrap();
    assert_eq!((r.width_m, r.length_m, r.orientation_deg), (10.0, 40.0, 0.0));
    let tilted = rotate(&Polygon::rect(-20.0, -5.0, 20.0, 5.0).unwrap(), 30.0);
    let r = min_bounding_rect(&tilted).unwrap();
    assert!((r.orientation_deg - 30.0).abs() < 1e-9);
    assert!((r.area() - 400.0).abs() < 1e-9);
}

#[test]
fn min_bounding_rect_beats_angle_scan() {
    let mut r = rng(9);
    for _ in 0..40 {
        let poly = random_convex(&mut r, 0.0, 0.0, 30.0);
        let mbg = min_bounding_rect(&poly).unwrap();
        let scan = (0..1800).map(|s| rect_area_at(poly.exterior(), s as f64 * 0.1)).fold(f64::INFINITY, f64::min);
        assert!(mbg.area() <= scan * (1.0 + 1e-12));
        assert!(mbg.area() >= scan * 0.995);
    }
}

#[test]
fn temporal_stats_match_direct_computation() {
    let layers: Vec<_> = (0..7).map(|s| random_grid(6, 5, 0.2, 40 + s)).collect();
    let refs: Vec<_> = layers.iter().collect();
    let kinds = [StatKind::Mean, StatKind::Median, StatKind::Min, StatKind::Max];
    let out = temporal_stats(&refs, &kinds).unwrap();
    for i in 0..30 {
        let series: Vec<f64> = layers.iter().filter_map(|g| g.valid_at(i)).collect();
        let expect = [
            stats::mean(&series),
            median(series.clone()),
            series.iter().copied().reduce(f64::min),
            series.iter().copied().reduce(f64::max),
        ];
        for (k, e) in expect.iter().enumerate() {
            match e {
                Some(v) => assert!((out[k].valid_at(i).unwrap() - v).abs() <= 1e-5 * v.abs().max(1.0), "{:?} at {i}", kinds[k]),
                None => assert_eq!(out[k].valid_at(i), None),
            }
        }
    }
}

#[test]
fn normalized_difference_is_antisymmetric_and_bounded() {
    let a = random_grid(8, 8, 0.1, 1);
    let b = random_grid(8, 8, 0.1, 2);
    let ab = normalized_difference(&a, &b).unwrap();
    let ba = normalized_difference(&b, &a).unwrap();
    for i in 0..64 {
        match (a.valid_at(i), b.valid_at(i)) {
            (Some(x), Some(y)) if (x + y).abs() > 1e-3 => {
                let v = ab.valid_at(i).unwrap();
                assert!((v - (x - y) / (x + y)).abs() < 1e-4 * v.abs().max(1.0));
                assert_eq!(v, -ba.valid_at(i).unwrap());
            }
            (None, _) | (_, None) => assert_eq!(ab.valid_at(i), None),
            _ => {}
        }
    }
}

#[test]
fn percentile_clip_keeps_the_band() {
    let g = random_grid(20, 20, 0.1, 5);
    let valid: Vec<f64> = (0..400).filter_map(|i| g.valid_at(i)).collect();
    let (lo, hi) = (percentile(valid.clone(), 5.0), percentile(valid, 95.0));
    let m = percentile_clip_mask(&g, 5.0, 95.0).unwrap();
    for i in 0..400 {
        assert_eq!(m.bits()[i], g.valid_at(i).is_some_and(|v| v >= lo && v <= hi));
    }
}

#[test]
fn shapley_exact_matches_definition_on_three_features() {
    // Permutation-average definition written out by hand for p = 3.
    let f = |x: &[f64]| x[0] * x[1] + x[2].exp() - x[0] * x[2];
    let model = FnRegressor(f);
    let mut r = rng(2);
    let bg_rows: Vec<Vec<f64>> = (0..7).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let bg = Dataset::from_rows(&bg_rows, vec![0.0; 7]).unwrap();
    let x = [0.3, -1.2, 0.8];
    let v = |s: [bool; 3]| {
        (0..bg.n_rows())
            .map(|b| {
                let z: Vec<f64> = (0..3).map(|j| if s[j] { x[j] } else { bg.get(b, j) }).collect();
                f(&z)
            })
            .sum::<f64>()
            / bg.n_rows() as f64
    };
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut phi = [0.0; 3];
    for p in perms {
        let mut s = [false; 3];
        for &j in &p {
            let before = v(s);
            s[j] = true;
            phi[j] += (v(s) - before) / 6.0;
        }
    }
    let got = shapley_values(&model, &x, &bg, ShapleyMode::Exact, 0).unwrap();
    for j in 0..3 {
        assert!((got.phi[j] - phi[j]).abs() < 1e-12);
    }
    let sampled = shapley_values(&model, &x, &bg, ShapleyMode::Sampled { samples: 4000 }, 1).unwrap();
    for j in 0..3 {
        assert!((sampled.phi[j] - phi[j]).abs() < 0.05 * phi.iter().map(|p| p.abs()).sum::<f64>());
    }
}

#[test]
fn importance_of_ignored_feature_is_zero() {
    let ds = nonlinear_dataset(150, 5, 0.2, 8);
    let model = FnRegressor(|x: &[f64]| x[0] * x[0] + (3.0 * x[1]).sin());
    let rep = permutation_importance(&model, &ds, 5, 1).unwrap();
    assert_eq!(&rep.scores[2..], &[0.0, 0.0, 0.0]);
    assert!(rep.scores[0] > 0.0 && rep.scores[1] > 0.0);

    let mut flat = ds.clone();
    for i in 0..flat.n_rows() {
        flat.x[i * 5 + 4] = 1.0;
    }
    let forest = fit_forest(&flat, ForestParams { n_trees: 30, seed: 2, ..Default::default() }).unwrap();
    assert_eq!(rf_variable_importance(&forest, &flat, 3, 0).unwrap()[4], 0.0);
}
