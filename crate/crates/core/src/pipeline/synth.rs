//! Synthetic city: rotated rectangular buildings with log-normal heights,
//! multi-date optical and SAR layers where five bands respond to the height
//! of the nearest building, SAR double-bounce halos, an nDSM and regions.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::PipelineConfig;
use super::stack_io::write_stack;
use crate::error::{Error, Result};
use crate::geometry::{write_footprints, write_regions, Footprint, FootprintSet, Point, Polygon, Region};
use crate::raster::{self, write_raster, GridGeometry, LayerLabel, RasterGrid, RasterStack, DEFAULT_NODATA};
use crate::stats;

/// Bands whose values depend on building height.
pub const INFORMATIVE_SIGNALS: [&str; 5] = ["B4", "B5", "B6", "VV", "VH"];
pub const SYNTH_BANDS: [&str; 8] = ["B3", "B4", "B5", "B6", "B8", "B11", "VV", "VH"];
pub const MAX_HEIGHT_M: f64 = 550.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub size: usize,
    pub n_buildings: usize,
    pub pixel_size: f64,
    pub n_dates: usize,
    /// Buildings at least this tall get a SAR halo.
    pub halo_min_height_m: f64,
    /// Reach of a building's signal around its footprint.
    pub influence_m: f64,
    /// Per-pixel persistent noise, in log-height units.
    pub static_noise: f64,
    /// Per-pixel per-date noise, in log-height units.
    pub date_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 1,
            size: 256,
            n_buildings: 450,
            pixel_size: 10.0,
            n_dates: 6,
            halo_min_height_m: 25.0,
            influence_m: 60.0,
            static_noise: 1.5,
            date_noise: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub id: String,
    pub height_m: f64,
    pub ln_height: f64,
    /// Median over a 50 m buffered zone of each informative band's temporal mean.
    pub signals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthCity {
    pub stack: RasterStack,
    pub footprints: FootprintSet,
    pub ndsm: RasterGrid,
    pub regions: Vec<Region>,
    pub truth: Vec<TruthRow>,
}

struct BandModel {
    name: &'static str,
    base: f64,
    scale: f64,
    response: fn(f64) -> f64,
    halo: f64,
}

fn none(_: f64) -> f64 {
    0.0
}
fn linear(f: f64) -> f64 {
    f
}
fn sigmoid(f: f64) -> f64 {
    5.0 / (1.0 + (-(f - 3.0)).exp())
}
fn convex(f: f64) -> f64 {
    f + 0.08 * f * f
}

const BANDS: [BandModel; 8] = [
    BandModel { name: "B3", base: 0.08, scale: 0.02, response: none, halo: 0.0 },
    BandModel { name: "B4", base: 0.12, scale: 0.015, response: linear, halo: 0.0 },
    BandModel { name: "B5", base: 0.10, scale: 0.02, response: sigmoid, halo: 0.0 },
    BandModel { name: "B6", base: 0.12, scale: 0.015, response: convex, halo: 0.0 },
    BandModel { name: "B8", base: 0.25, scale: 0.03, response: none, halo: 0.0 },
    BandModel { name: "B11", base: 0.18, scale: 0.025, response: none, halo: 0.0 },
    BandModel { name: "VV", base: 0.05, scale: 0.04, response: linear, halo: 1.0 },
    BandModel { name: "VH", base: 0.01, scale: 0.008, response: linear, halo: 0.25 },
];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn boundary_distance(poly: &Polygon, p: Point) -> f64 {
    if poly.contains(p) {
        return 0.0;
    }
    poly.edges()
        .map(|(a, b)| crate::geometry::point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

fn place_buildings(p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<Vec<Polygon>> {
    let extent = p.size as f64 * p.pixel_size;
    let margin = 60.0;
    let gap = 15.0;
    let max_attempts = p.n_buildings * 400;
    let mut polys: Vec<Polygon> = Vec::with_capacity(p.n_buildings);
    let mut boxes: Vec<(Point, Point)> = Vec::with_capacity(p.n_buildings);
    let mut attempts = 0;
    while polys.len() < p.n_buildings {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Data(format!(
                "could not place {} non-overlapping buildings on a {}x{} grid after {max_attempts} attempts",
                p.n_buildings, p.size, p.size
            )));
        }
        let cx = rng.gen_range(margin..extent - margin);
        let cy = rng.gen_range(margin..extent - margin);
        let w = rng.gen_range(15.0..35.0);
        let l = w * rng.gen_range(1.0..2.5);
        let th = rng.gen_range(0.0..PI);
        let (u, v) = (Point::new(th.cos(), th.sin()), Point::new(-th.sin(), th.cos()));
        let corner = |a: f64, b: f64| Point::new(cx + a * l / 2.0 * u.x + b * w / 2.0 * v.x, cy + a * l / 2.0 * u.y + b * w / 2.0 * v.y);
        let ring = vec![corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)];
        let poly = Polygon::new(ring, vec![])?;
        let (lo, hi) = poly.bounds();
        let clash = boxes
            .iter()
            .any(|(a, b)| lo.x - gap < b.x && hi.x + gap > a.x && lo.y - gap < b.y && hi.y + gap > a.y);
        if !clash {
            boxes.push((lo, hi));
            polys.push(poly);
        }
    }
    Ok(polys)
}

pub fn synth_generate(p: &SynthParams) -> Result<SynthCity> {
    if p.size < 64 {
        return Err(Error::Parameter(format!("size must be >= 64 px, got {}", p.size)));
    }
    if p.n_buildings < 10 {
        return Err(Error::Parameter(format!("n_buildings must be >= 10, got {}", p.n_buildings)));
    }
    if p.n_dates == 0 {
        return Err(Error::Parameter("n_dates must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let extent = p.size as f64 * p.pixel_size;
    let geom = GridGeometry::new(p.size, p.size, 0.0, extent, p.pixel_size)?;

    let polys = place_buildings(p, &mut rng)?;
    let centre = Point::new(rng.gen_range(0.35..0.65) * extent, rng.gen_range(0.35..0.65) * extent);
    let spread = 0.22 * extent;
    let trend = |q: Point| {
        let d = q.sub(centre);
        2.0 + 1.8 * (-(d.dot(d)) / (2.0 * spread * spread)).exp()
    };
    let heights: Vec<f64> = polys
        .iter()
        .map(|poly| {
            let lh = trend(crate::geometry::centroid(poly)) + 0.45 * normal(&mut rng);
            lh.exp().clamp(1.0, MAX_HEIGHT_M)
        })
        .collect();
    let footprints = FootprintSet::new(
        polys
            .iter()
            .enumerate()
            .map(|(k, poly)| Footprint::new(format!("b{k:04}"), poly.clone(), None))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let cells: Vec<Vec<usize>> = polys.iter().map(|poly| raster::rasterize_indices(poly, &geom)).collect();

    // Log height of the nearest building within reach; the regional trend elsewhere.
    let n = geom.len();
    let mut best = vec![f64::INFINITY; n];
    let mut field: Vec<f64> = (0..n)
        .map(|i| {
            let (r, c) = (i / geom.cols, i % geom.cols);
            trend(Point::new(geom.center_x(c), geom.center_y(r)))
        })
        .collect();
    for (k, poly) in polys.iter().enumerate() {
        let (lo, hi) = poly.bounds();
        let reach = p.influence_m;
        let c0 = (((lo.x - reach) / p.pixel_size).floor().max(0.0)) as usize;
        let c1 = ((((hi.x + reach) / p.pixel_size).ceil()) as usize).min(geom.cols - 1);
        let r0 = (((extent - hi.y - reach) / p.pixel_size).floor().max(0.0)) as usize;
        let r1 = ((((extent - lo.y + reach) / p.pixel_size).ceil()) as usize).min(geom.rows - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let d = boundary_distance(poly, Point::new(geom.center_x(c), geom.center_y(r)));
                let i = geom.index(r, c);
                if d <= reach && d < best[i] {
                    best[i] = d;
                    field[i] = heights[k].ln();
                }
            }
        }
    }

    // Double-bounce halo: a 1-2 px ring plus the footprint's edge pixels.
    let mut halo = vec![0.0f64; n];
    for (k, fp_cells) in cells.iter().enumerate() {
        if heights[k] < p.halo_min_height_m || fp_cells.is_empty() {
            continue;
        }
        let width = rng.gen_range(1..=2) as f64 * p.pixel_size;
        let amp = rng.gen_range(0.25..0.6);
        let inside: std::collections::HashSet<usize> = fp_cells.iter().copied().collect();
        let interior = |i: usize| {
            let (r, c) = (i / geom.cols, i % geom.cols);
            r > 0
                && c > 0
                && r + 1 < geom.rows
                && c + 1 < geom.cols
                && [i - 1, i + 1, i - geom.cols, i + geom.cols].iter().all(|j| inside.contains(j))
        };
        for i in raster::dilate_indices(&geom, fp_cells, width) {
            if !(inside.contains(&i) && interior(i)) {
                halo[i] = halo[i].max(amp);
            }
        }
    }

    let dates: Vec<String> = (0..p.n_dates).map(|t| format!("2016-{:02}", 2 * t + 1)).collect();
    let mut labels = Vec::new();
    let mut layers = Vec::new();
    for band in &BANDS {
        let fixed: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        for date in &dates {
            let vals: Vec<f32> = (0..n)
                .map(|i| {
                    let z = (band.response)(field[i]) + p.static_noise * fixed[i] + p.date_noise * normal(&mut rng);
                    let mut v = band.base + band.scale * z;
                    if band.halo > 0.0 && halo[i] > 0.0 {
                        v += band.halo * halo[i] * (1.0 + 0.2 * normal(&mut rng));
                    }
                    v.max(0.001) as f32
                })
                .collect();
            labels.push(LayerLabel {
                band: band.name.into(),
                timestamp: date.clone(),
            });
            layers.push(RasterGrid::new(geom, DEFAULT_NODATA, vals)?);
        }
    }
    let stack = RasterStack::new(geom, labels, layers)?;

    let mut ndsm_vals: Vec<f32> = (0..n).map(|_| (0.3 * normal(&mut rng)).abs() as f32).collect();
    for (k, fp_cells) in cells.iter().enumerate() {
        for &i in fp_cells {
            ndsm_vals[i] = (heights[k] * (1.0 + 0.02 * normal(&mut rng)) + 0.3 * normal(&mut rng)).max(0.0) as f32;
        }
    }
    let ndsm = RasterGrid::new(geom, DEFAULT_NODATA, ndsm_vals)?;

    let means: Vec<RasterGrid> = INFORMATIVE_SIGNALS
        .iter()
        .map(|s| crate::spectral::temporal_stat(&stack, s, crate::spectral::StatKind::Mean))
        .collect::<Result<_>>()?;
    let mut buf = Vec::new();
    let truth = footprints
        .iter()
        .zip(&cells)
        .zip(&heights)
        .map(|((fp, fp_cells), &h)| {
            let zone = raster::dilate_indices(&geom, fp_cells, 50.0);
            let signals = means
                .iter()
                .map(|g| {
                    buf.clear();
                    buf.extend(zone.iter().filter_map(|&i| g.valid_at(i)));
                    stats::median_in_place(&mut buf).unwrap_or(f64::NAN)
                })
                .collect();
            TruthRow {
                id: fp.id.clone(),
                height_m: h,
                ln_height: h.ln(),
                signals,
            }
        })
        .collect();

    let half = extent / 2.0;
    let regions = [(0.0, half, "q1"), (half, half, "q2"), (0.0, 0.0, "q3"), (half, 0.0, "q4")]
        .iter()
        .map(|&(x, y, id)| {
            Ok(Region {
                id: id.into(),
                polygon: Polygon::rect(x, y, x + half, y + half)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SynthCity {
        stack,
        footprints,
        ndsm,
        regions,
        truth,
    })
}

/// Writes the city under `dir` with a ready-to-use `config.json`; returns that config.
pub fn write_city(city: &SynthCity, dir: impl AsRef<Path>) -> Result<PipelineConfig> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_stack(&city.stack, dir.join("stack").join("stack.json"))?;
    write_footprints(&city.footprints, dir.join("footprints.geojson"))?;
    write_regions(&city.regions, dir.join("regions.geojson"))?;
    write_raster(&city.ndsm, dir.join("ndsm.bhgr"))?;

    let truth_path = dir.join("truth.csv");
    let mut w = csv::Writer::from_path(&truth_path)?;
    let mut header = vec!["id".to_string(), "height_m".into(), "ln_height".into()];
    header.extend(INFORMATIVE_SIGNALS.iter().map(|s| format!("{s}_zone_mean")));
    w.write_record(&header)?;
    for t in &city.truth {
        let mut rec = vec![t.id.clone(), t.height_m.to_string(), t.ln_height.to_string()];
        rec.extend(t.signals.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&truth_path, e))?;

    let cfg = PipelineConfig {
        stacks: vec!["stack/stack.json".into()],
        footprints: Some("footprints.geojson".into()),
        ndsm: Some("ndsm.bhgr".into()),
        regions: Some("regions.geojson".into()),
        features_dir: "features".into(),
        out_dir: "out".into(),
        ..Default::default()
    };
    cfg.save(dir.join("config.json"))?;
    let mut resolved = cfg;
    resolved.resolve_paths(dir);
    Ok(resolved)
}
