//! Object-based training samples: buffered zonal medians per footprint,
//! reference heights, percentile filtering, log transform and bin medians.

mod table;

pub use table::{Dataset, FeatureTable, LOG_TARGET, RAW_TARGET};

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{shape_features, Footprint, FootprintSet, GeometryFeature};
use crate::raster::{self, GridGeometry, MaskGrid, RasterGrid};
use crate::spectral::FeatureRasters;
use crate::stats;

/// Median of valid values at `indices`.
pub(crate) fn zonal_median_indices(grid: &RasterGrid, indices: &[usize], buf: &mut Vec<f64>) -> Option<f64> {
    buf.clear();
    buf.extend(indices.iter().filter_map(|&i| grid.valid_at(i)));
    stats::median_in_place(buf)
}

/// Median of the valid grid values under `mask`; `None` when there are none.
pub fn zonal_median(grid: &RasterGrid, mask: &MaskGrid) -> Result<Option<f64>> {
    grid.geometry().ensure_aligned(mask.geometry())?;
    Ok(zonal_median_indices(grid, &mask.indices(), &mut Vec::new()))
}

/// Why a footprint produced no training row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    OffRaster,
    SubPixel,
    NoReference,
    MissingFeature(String),
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::OffRaster => write!(f, "footprint off raster"),
            DropReason::SubPixel => write!(f, "sub-pixel footprint"),
            DropReason::NoReference => write!(f, "no valid reference height"),
            DropReason::MissingFeature(n) => write!(f, "no valid values for {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dropped {
    pub id: String,
    pub reason: DropReason,
}

fn overlaps_grid(fp: &Footprint, g: &GridGeometry) -> bool {
    let (lo, hi) = fp.polygon.bounds();
    let (x0, x1) = (g.origin_x, g.origin_x + g.cols as f64 * g.pixel_size);
    let (y1, y0) = (g.origin_y, g.origin_y - g.rows as f64 * g.pixel_size);
    hi.x > x0 && lo.x < x1 && hi.y > y0 && lo.y < y1
}

fn footprint_cells(fp: &Footprint, g: &GridGeometry) -> std::result::Result<Vec<usize>, DropReason> {
    let cells = raster::rasterize_indices(&fp.polygon, g);
    if !cells.is_empty() {
        Ok(cells)
    } else if overlaps_grid(fp, g) {
        Err(DropReason::SubPixel)
    } else {
        Err(DropReason::OffRaster)
    }
}

/// Median height-raster value over the footprint's own pixels (no buffer).
pub fn reference_height(ndsm: &RasterGrid, footprint: &Footprint) -> std::result::Result<f64, DropReason> {
    let cells = footprint_cells(footprint, ndsm.geometry())?;
    zonal_median_indices(ndsm, &cells, &mut Vec::new()).ok_or(DropReason::NoReference)
}

/// Where training targets come from.
#[derive(Debug, Clone, Copy)]
pub enum HeightSource<'a> {
    /// Median of a normalized surface model over each footprint.
    Raster(&'a RasterGrid),
    /// The footprint's own `ref_height_m` attribute.
    Attribute,
    /// No target column; used when only predictors are needed.
    None,
}

/// Assembled rows plus the footprints that were left out and why.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub table: FeatureTable,
    pub dropped: Vec<Dropped>,
}

/// One row per footprint: buffered zonal median of every raster feature,
/// shape features taken directly from the footprint, and the reference
/// height in meters as the `Height` target.
pub fn assemble_samples(
    features: &FeatureRasters,
    footprints: &FootprintSet,
    buffer_m: f64,
    heights: HeightSource<'_>,
) -> Result<Assembled> {
    if !(buffer_m >= 0.0) || !buffer_m.is_finite() {
        return Err(Error::Parameter(format!("buffer must be >= 0, got {buffer_m}")));
    }
    let Some(geom) = features.geometry().copied() else {
        return Err(Error::Data("no feature rasters to sample".into()));
    };
    if let HeightSource::Raster(n) = heights {
        geom.ensure_aligned(n.geometry())?;
    }
    let names: Vec<String> = features.names().to_vec();
    let shape_cols: Vec<Option<GeometryFeature>> = names.iter().map(|n| GeometryFeature::parse(n)).collect();
    let shapes = if shape_cols.iter().any(Option::is_some) {
        shape_features(footprints)
    } else {
        Vec::new()
    };
    let grids: Vec<&RasterGrid> = names.iter().map(|n| features.get(n).unwrap()).collect();

    let rows: Vec<std::result::Result<Vec<f64>, DropReason>> = footprints
        .as_slice()
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |buf, (k, fp)| {
            let cells = footprint_cells(fp, &geom)?;
            let zone = raster::dilate_indices(&geom, &cells, buffer_m);
            let mut row = Vec::with_capacity(names.len() + 1);
            for (j, grid) in grids.iter().enumerate() {
                let v = match shape_cols[j] {
                    Some(g) => g.value(&shapes[k]),
                    None => zonal_median_indices(grid, &zone, buf),
                };
                row.push(v.ok_or_else(|| DropReason::MissingFeature(names[j].clone()))?);
            }
            match heights {
                HeightSource::Raster(n) => row.push(zonal_median_indices(n, &cells, buf).ok_or(DropReason::NoReference)?),
                HeightSource::Attribute => row.push(fp.ref_height_m.ok_or(DropReason::NoReference)?),
                HeightSource::None => {}
            }
            Ok(row)
        })
        .collect();

    let mut ids = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (fp, r) in footprints.iter().zip(rows) {
        match r {
            Ok(row) => {
                ids.push(fp.id.clone());
                kept.push(row);
            }
            Err(reason) => dropped.push(Dropped {
                id: fp.id.clone(),
                reason,
            }),
        }
    }
    let mut columns = names;
    let target = match heights {
        HeightSource::None => None,
        _ => {
            columns.push(RAW_TARGET.into());
            Some(RAW_TARGET.to_string())
        }
    };
    Ok(Assembled {
        table: FeatureTable::new(columns, ids, kept, target)?,
        dropped,
    })
}

/// Bin-median compressed training table over the log-height target.
#[derive(Debug, Clone)]
pub struct BinnedTable {
    pub table: FeatureTable,
    pub start: f64,
    pub step: f64,
    /// Bins spanned from `start` up to the highest occupied bin.
    pub count: usize,
    pub bin_index: Vec<i64>,
    pub source_count: Vec<usize>,
}

/// Half-open bin `k` with `start + k*step <= t < start + (k+1)*step`.
pub fn bin_of(t: f64, start: f64, step: f64) -> i64 {
    let mut k = ((t - start) / step).floor() as i64;
    while start + k as f64 * step > t {
        k -= 1;
    }
    while start + (k + 1) as f64 * step <= t {
        k += 1;
    }
    k
}

/// Log transform used for every height target: `ln(max(h, 1))`.
pub fn log_height(h: f64) -> f64 {
    h.max(1.0).ln()
}

/// Drop targets outside the `[lo_pct, hi_pct]` percentile band, log-transform
/// them, and collapse rows into `bin_step` bins of the transformed target.
/// Each bin row holds per-column medians and the median transformed target.
pub fn prepare_training(table: &FeatureTable, lo_pct: f64, hi_pct: f64, bin_step: f64) -> Result<BinnedTable> {
    if !(bin_step > 0.0) || !bin_step.is_finite() {
        return Err(Error::Parameter(format!("bin step must be > 0, got {bin_step}")));
    }
    if !(0.0..100.0).contains(&lo_pct) || !(lo_pct < hi_pct && hi_pct <= 100.0) {
        return Err(Error::Parameter(format!(
            "percentile bounds must satisfy 0 <= lo < hi <= 100, got {lo_pct}..{hi_pct}"
        )));
    }
    let y = table.target_values()?;
    if y.is_empty() {
        return Err(Error::Data("cannot prepare an empty table".into()));
    }
    let mut sorted = y.clone();
    stats::sort_f64(&mut sorted);
    let lo = stats::percentile_sorted(&sorted, lo_pct).unwrap();
    let hi = stats::percentile_sorted(&sorted, hi_pct).unwrap();

    let features = table.feature_names();
    let fidx: Vec<usize> = features.iter().map(|f| table.column_index(f).unwrap()).collect();
    let start = 0.0;
    let mut bins: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut lt = vec![0.0; y.len()];
    for (i, &h) in y.iter().enumerate() {
        if h < lo || h > hi {
            continue;
        }
        lt[i] = log_height(h);
        bins.entry(bin_of(lt[i], start, bin_step)).or_default().push(i);
    }

    let mut rows = Vec::with_capacity(bins.len());
    let mut ids = Vec::with_capacity(bins.len());
    let mut bin_index = Vec::with_capacity(bins.len());
    let mut source_count = Vec::with_capacity(bins.len());
    let mut buf = Vec::new();
    for (&k, members) in &bins {
        let mut row: Vec<f64> = fidx
            .iter()
            .map(|&j| {
                buf.clear();
                buf.extend(members.iter().map(|&i| table.row(i)[j]));
                stats::median_in_place(&mut buf).unwrap()
            })
            .collect();
        buf.clear();
        buf.extend(members.iter().map(|&i| lt[i]));
        row.push(stats::median_in_place(&mut buf).unwrap());
        rows.push(row);
        ids.push(format!("bin{k}"));
        bin_index.push(k);
        source_count.push(members.len());
    }
    let count = bin_index.last().map_or(0, |&k| (k - bin_of(start, start, bin_step) + 1).max(0) as usize);
    let mut columns = features;
    columns.push(LOG_TARGET.into());
    Ok(BinnedTable {
        table: FeatureTable::new(columns, ids, rows, Some(LOG_TARGET.into()))?,
        start,
        step: bin_step,
        count,
        bin_index,
        source_count,
    })
}

/// Replace the raw `Height` target with `LHeight = ln(max(h, 1))`, row by row.
pub fn log_transform_target(table: &FeatureTable) -> Result<FeatureTable> {
    let t = table.target().ok_or_else(|| Error::Data("table has no target column".into()))?;
    if t == LOG_TARGET {
        return Ok(table.clone());
    }
    let tj = table.column_index(t).unwrap();
    let columns: Vec<String> = table
        .columns()
        .iter()
        .map(|c| if c == t { LOG_TARGET.to_string() } else { c.clone() })
        .collect();
    let mut values = Vec::with_capacity(table.n_rows() * table.width());
    for i in 0..table.n_rows() {
        values.extend(table.row(i).iter().enumerate().map(|(j, &v)| if j == tj { log_height(v) } else { v }));
    }
    FeatureTable::from_flat(columns, table.ids().to_vec(), values, Some(LOG_TARGET.into()))
}

/// Number of test rows for `n` rows: `ceil(n * fraction)`, kept within `[1, n-1]`.
pub fn test_count(n: usize, test_fraction: f64) -> usize {
    ((n as f64 * test_fraction - 1e-9).ceil() as usize).clamp(1, n - 1)
}

/// Seeded shuffle of row indices split into `(train, test)`.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 rows to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n - test_count(n, test_fraction));
    Ok((idx, test))
}

pub fn split(table: &FeatureTable, test_fraction: f64, seed: u64) -> Result<(FeatureTable, FeatureTable)> {
    let (tr, te) = split_indices(table.n_rows(), test_fraction, seed)?;
    Ok((table.take_rows(&tr), table.take_rows(&te)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::raster::DEFAULT_NODATA;

    fn geom() -> GridGeometry {
        GridGeometry::new(10, 10, 0.0, 100.0, 10.0).unwrap()
    }

    fn fp(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, h: Option<f64>) -> Footprint {
        Footprint::new(id, Polygon::rect(x0, y0, x1, y1).unwrap(), h).unwrap()
    }

    #[test]
    fn zonal_median_examples() {
        let g = GridGeometry::new(1, 3, 0.0, 10.0, 10.0).unwrap();
        let grid = RasterGrid::new(g, DEFAULT_NODATA, vec![1.0, 2.0, 100.0]).unwrap();
        let all = MaskGrid::from_bits(g, vec![true; 3]).unwrap();
        assert_eq!(zonal_median(&grid, &all).unwrap(), Some(2.0));
        assert_eq!(zonal_median(&grid, &MaskGrid::empty(g)).unwrap(), None);
    }

    #[test]
    fn reference_height_is_robust() {
        let g = GridGeometry::new(1, 3, 0.0, 10.0, 10.0).unwrap();
        let ndsm = RasterGrid::new(g, DEFAULT_NODATA, vec![10.0, 10.0, 30.0]).unwrap();
        assert_eq!(reference_height(&ndsm, &fp("a", 0.0, 0.0, 30.0, 10.0, None)), Ok(10.0));
        assert_eq!(reference_height(&ndsm, &fp("b", 500.0, 500.0, 510.0, 510.0, None)), Err(DropReason::OffRaster));
        assert_eq!(reference_height(&ndsm, &fp("c", 1.0, 1.0, 2.0, 2.0, None)), Err(DropReason::SubPixel));
    }

    #[test]
    fn assemble_constant_grids_buffer_zero() {
        let mut fr = FeatureRasters::new();
        fr.push("a", RasterGrid::filled(geom(), 3.3, DEFAULT_NODATA)).unwrap();
        fr.push("b", RasterGrid::filled(geom(), -1.0, DEFAULT_NODATA)).unwrap();
        let set = FootprintSet::new(vec![fp("x", 20.0, 20.0, 40.0, 40.0, Some(7.0))]).unwrap();
        let out = assemble_samples(&fr, &set, 0.0, HeightSource::Attribute).unwrap();
        assert_eq!(out.table.row(0), &[3.3f32 as f64, -1.0, 7.0]);
        assert!(out.dropped.is_empty());
    }

    #[test]
    fn nodata_zone_drops_row() {
        let mut fr = FeatureRasters::new();
        fr.push("a", RasterGrid::filled(geom(), DEFAULT_NODATA, DEFAULT_NODATA)).unwrap();
        let set = FootprintSet::new(vec![fp("x", 20.0, 20.0, 40.0, 40.0, Some(7.0))]).unwrap();
        let out = assemble_samples(&fr, &set, 50.0, HeightSource::Attribute).unwrap();
        assert_eq!(out.table.n_rows(), 0);
        assert_eq!(out.dropped[0].reason, DropReason::MissingFeature("a".into()));
    }

    #[test]
    fn binning_hand_example() {
        let hs = [2.003f64, 2.007, 2.009].map(f64::exp);
        let t = FeatureTable::new(
            vec!["f".into(), RAW_TARGET.into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, hs[0]], vec![5.0, hs[1]], vec![2.0, hs[2]]],
            Some(RAW_TARGET.into()),
        )
        .unwrap();
        let b = prepare_training(&t, 0.0, 100.0, 0.01).unwrap();
        assert_eq!(b.table.n_rows(), 1);
        assert_eq!(b.bin_index, vec![200]);
        assert_eq!(b.source_count, vec![3]);
        assert_eq!(b.table.row(0)[0], 2.0);
        assert!((b.table.row(0)[1] - 2.007).abs() < 1e-12);
    }

    #[test]
    fn bin_of_is_half_open() {
        assert_eq!(bin_of(0.0, 0.0, 0.01), 0);
        assert_eq!(bin_of(0.03, 0.0, 0.01), 3);
        assert_eq!(bin_of(0.0299999, 0.0, 0.01), 2);
        for k in 0..700 {
            let t = k as f64 * 0.01;
            let b = bin_of(t, 0.0, 0.01);
            assert!(b as f64 * 0.01 <= t && t < (b + 1) as f64 * 0.01);
        }
    }

    #[test]
    fn split_counts_and_determinism() {
        let (tr, te) = split_indices(10, 0.2, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(split_indices(10, 0.2, 7).unwrap(), (tr, te));
        assert_eq!(split_indices(100, 0.001, 1).unwrap().1.len(), 1);
        assert!(split_indices(1, 0.5, 1).is_err());
        assert!(split_indices(10, 0.0, 1).is_err());
        assert_ne!(split_indices(1000, 0.3, 1).unwrap(), split_indices(1000, 0.3, 2).unwrap());
    }
}
