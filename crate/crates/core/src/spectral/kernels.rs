use rayon::prelude::*;

use super::StatKind;
use crate::error::{Error, Result};
use crate::raster::{RasterGrid, RasterStack};
use crate::stats;

pub const EPS_DIV: f64 = 1e-12;
pub const EPS_VAR: f64 = 1e-12;

/// Per-pixel `(a - b) / (a + b)`; nodata where either input is nodata or the
/// denominator vanishes.
pub fn normalized_difference(a: &RasterGrid, b: &RasterGrid) -> Result<RasterGrid> {
    a.geometry().ensure_aligned(b.geometry())?;
    let vals = (0..a.geometry().len()).map(|i| {
        let x = a.valid_at(i)?;
        let y = b.valid_at(i)?;
        let den = x + y;
        if den.abs() < EPS_DIV {
            None
        } else {
            Some((x - y) / den)
        }
    });
    Ok(RasterGrid::from_f64(*a.geometry(), a.nodata(), vals))
}

/// Per-pixel `VV * gamma^VH`.
pub fn vvh_index(vv: &RasterGrid, vh: &RasterGrid, gamma: f64) -> Result<RasterGrid> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("VVH gamma must be > 0, got {gamma}")));
    }
    vv.geometry().ensure_aligned(vh.geometry())?;
    let vals = (0..vv.geometry().len()).map(|i| Some(vv.valid_at(i)? * gamma.powf(vh.valid_at(i)?)));
    Ok(RasterGrid::from_f64(*vv.geometry(), vv.nodata(), vals))
}

/// Statistic of an ascending, non-empty series.
pub fn series_stat(sorted: &[f64], stat: StatKind) -> Option<f64> {
    use StatKind::*;
    let pct = |p| stats::percentile_sorted(sorted, p);
    match stat {
        Min => pct(0.0),
        Max => pct(100.0),
        Median => pct(50.0),
        P10 => pct(10.0),
        P25 => pct(25.0),
        P75 => pct(75.0),
        P90 => pct(90.0),
        InterquartileRange => Some(pct(75.0)? - pct(25.0)?),
        Mean => stats::mean(sorted),
        StdDev => stats::central_moments(sorted).map(|(_, m2, _, _)| m2.sqrt()),
        Skewness | Kurtosis => {
            if sorted.len() < 3 {
                return None;
            }
            let (_, m2, m3, m4) = stats::central_moments(sorted)?;
            if m2 < EPS_VAR {
                return None;
            }
            Some(if stat == Skewness { m3 / m2.powf(1.5) } else { m4 / (m2 * m2) - 3.0 })
        }
    }
}

/// Several statistics over the same time series in one pass per pixel.
pub fn temporal_stats(layers: &[&RasterGrid], wanted: &[StatKind]) -> Result<Vec<RasterGrid>> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Lookup("time series has no layers".into()))?;
    let g = *first.geometry();
    for l in layers {
        g.ensure_aligned(l.geometry())?;
    }
    let nodata = first.nodata();
    let per_pixel: Vec<Vec<Option<f64>>> = (0..g.len())
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(layers.len()),
            |buf, i| {
                buf.clear();
                buf.extend(layers.iter().filter_map(|l| l.valid_at(i)));
                if buf.is_empty() {
                    return vec![None; wanted.len()];
                }
                stats::sort_f64(buf);
                wanted.iter().map(|&s| series_stat(buf, s)).collect()
            },
        )
        .collect();
    Ok((0..wanted.len())
        .map(|k| RasterGrid::from_f64(g, nodata, per_pixel.iter().map(|v| v[k])))
        .collect())
}

/// Per-pixel statistic of one band's time series in `stack`.
pub fn temporal_stat(stack: &RasterStack, signal: &str, stat: StatKind) -> Result<RasterGrid> {
    let layers = stack.band(signal);
    if layers.is_empty() {
        return Err(Error::Lookup(format!("signal {signal} not present in stack")));
    }
    Ok(temporal_stats(&layers, &[stat])?.pop().unwrap())
}
