//! Grid data model and the raster kernels every other module builds on.
//!
//! Grids are north-up with square pixels. `origin_x`/`origin_y` is the
//! top-left corner of the top-left pixel; rows run downward (decreasing y).

mod io;
mod ops;

pub use io::{decode_raster, encode_raster, read_raster, write_raster, BHGR_MAGIC, BHGR_VERSION};
pub use ops::{buffer_mask, percentile_clip_mask, rasterize, window_median, window_radius};
pub(crate) use ops::{contains_point, dilate_indices, rasterize_indices};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridGeometry {
    pub rows: usize,
    pub cols: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize, origin_x: f64, origin_y: f64, pixel_size: f64) -> Result<Self> {
        let g = GridGeometry {
            rows,
            cols,
            origin_x,
            origin_y,
            pixel_size,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Validation(format!(
                "grid must have at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return Err(Error::Validation(format!("pixel size must be positive, got {}", self.pixel_size)));
        }
        if !self.origin_x.is_finite() || !self.origin_y.is_finite() {
            return Err(Error::Validation("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Aligned iff all five fields are equal.
    pub fn is_aligned(&self, other: &GridGeometry) -> bool {
        self == other
    }

    pub fn ensure_aligned(&self, other: &GridGeometry) -> Result<()> {
        if self.is_aligned(other) {
            Ok(())
        } else {
            Err(Error::Geometry(format!("grids are not aligned: {self:?} vs {other:?}")))
        }
    }

    #[inline]
    pub fn center_x(&self, col: usize) -> f64 {
        self.origin_x + (col as f64 + 0.5) * self.pixel_size
    }

    #[inline]
    pub fn center_y(&self, row: usize) -> f64 {
        self.origin_y - (row as f64 + 0.5) * self.pixel_size
    }

    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        (self.center_x(col), self.center_y(row))
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Inclusive range of rows whose centers may fall in `[y_min, y_max]`.
    pub(crate) fn row_span(&self, y_min: f64, y_max: f64) -> Option<(usize, usize)> {
        let ps = self.pixel_size;
        let first = ((self.origin_y - y_max) / ps - 0.5).floor().max(0.0);
        let last = ((self.origin_y - y_min) / ps - 0.5).ceil();
        if last < 0.0 || first >= self.rows as f64 {
            return None;
        }
        Some((first as usize, (last as usize).min(self.rows - 1)))
    }
}

/// Row-major float grid with a nodata sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    geometry: GridGeometry,
    nodata: f32,
    values: Vec<f32>,
}

pub const DEFAULT_NODATA: f32 = -9999.0;

impl RasterGrid {
    pub fn new(geometry: GridGeometry, nodata: f32, values: Vec<f32>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(Error::Shape {
                expected: geometry.len(),
                got: values.len(),
            });
        }
        let grid = RasterGrid {
            geometry,
            nodata,
            values,
        };
        if let Some(i) = grid.values.iter().position(|&v| !v.is_finite() && !grid.is_nodata(v)) {
            return Err(Error::Validation(format!(
                "non-finite value {} at pixel {} is not the nodata sentinel",
                grid.values[i], i
            )));
        }
        Ok(grid)
    }

    pub fn filled(geometry: GridGeometry, value: f32, nodata: f32) -> Self {
        RasterGrid {
            geometry,
            nodata,
            values: vec![value; geometry.len()],
        }
    }

    /// Build a grid from f64 values; non-finite results become nodata.
    pub fn from_f64(geometry: GridGeometry, nodata: f32, values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let values: Vec<f32> = values
            .into_iter()
            .map(|v| match v {
                Some(x) if x.is_finite() && (x as f32).is_finite() => x as f32,
                _ => nodata,
            })
            .collect();
        debug_assert_eq!(values.len(), geometry.len());
        RasterGrid {
            geometry,
            nodata,
            values,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn is_nodata(&self, v: f32) -> bool {
        v == self.nodata || (self.nodata.is_nan() && v.is_nan())
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[self.geometry.index(row, col)]
    }

    /// Valid pixel value as f64, `None` for nodata.
    #[inline]
    pub fn valid_at(&self, idx: usize) -> Option<f64> {
        let v = self.values[idx];
        if self.is_nodata(v) {
            None
        } else {
            Some(v as f64)
        }
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| !self.is_nodata(v)).count()
    }
}

/// Boolean membership grid (footprints, buffers, clip masks).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    geometry: GridGeometry,
    bits: Vec<bool>,
}

impl MaskGrid {
    pub fn empty(geometry: GridGeometry) -> Self {
        MaskGrid {
            geometry,
            bits: vec![false; geometry.len()],
        }
    }

    pub fn from_bits(geometry: GridGeometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geometry.len() {
            return Err(Error::Shape {
                expected: geometry.len(),
                got: bits.len(),
            });
        }
        Ok(MaskGrid { geometry, bits })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[self.geometry.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        let i = self.geometry.index(row, col);
        self.bits[i] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of set pixels, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn union_with(&mut self, other: &MaskGrid) -> Result<()> {
        self.geometry.ensure_aligned(&other.geometry)?;
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &MaskGrid) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LayerLabel {
    pub band: String,
    pub timestamp: String,
}

/// Co-registered time series of grids, possibly holding several bands.
#[derive(Debug, Clone)]
pub struct RasterStack {
    geometry: GridGeometry,
    labels: Vec<LayerLabel>,
    layers: Vec<RasterGrid>,
}

impl RasterStack {
    pub fn new(geometry: GridGeometry, labels: Vec<LayerLabel>, layers: Vec<RasterGrid>) -> Result<Self> {
        if labels.len() != layers.len() {
            return Err(Error::Shape {
                expected: labels.len(),
                got: layers.len(),
            });
        }
        for layer in &layers {
            geometry.ensure_aligned(layer.geometry())?;
        }
        let mut last: std::collections::HashMap<&str, &str> = Default::default();
        for l in &labels {
            if let Some(prev) = last.insert(&l.band, &l.timestamp) {
                if prev > l.timestamp.as_str() {
                    return Err(Error::Validation(format!(
                        "timestamps for band {} decrease ({} after {})",
                        l.band, l.timestamp, prev
                    )));
                }
            }
        }
        Ok(RasterStack {
            geometry,
            labels,
            layers,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[LayerLabel] {
        &self.labels
    }

    pub fn layers(&self) -> &[RasterGrid] {
        &self.layers
    }

    /// Layers of one band in timestamp order.
    pub fn band(&self, name: &str) -> Vec<&RasterGrid> {
        self.labels
            .iter()
            .zip(&self.layers)
            .filter(|(l, _)| l.band == name)
            .map(|(_, g)| g)
            .collect()
    }

    pub fn band_layers(&self, name: &str) -> Vec<(&LayerLabel, &RasterGrid)> {
        self.labels.iter().zip(&self.layers).filter(|(l, _)| l.band == name).collect()
    }

    pub fn has_band(&self, name: &str) -> bool {
        self.labels.iter().any(|l| l.band == name)
    }

    pub fn band_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.labels {
            if !out.contains(&l.band) {
                out.push(l.band.clone());
            }
        }
        out
    }
}
