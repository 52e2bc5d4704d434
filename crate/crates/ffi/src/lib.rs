//! C ABI over the `bheight` library.
//!
//! Objects cross the boundary as opaque handles created by `*_read`/`*_new`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`BhStatus`]; on failure the message is kept per thread and can
//! be fetched with [`bh_last_error_message`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use bheight::geometry::{read_footprints, shape_features, FootprintSet};
use bheight::models::TrainedModel;
use bheight::pipeline::{self, PipelineConfig};
use bheight::raster::{read_raster, window_median, write_raster, GridGeometry, RasterGrid};
use bheight::spectral::read_feature_dir;
use bheight::{Error, ErrorClass};

/// Result of every fallible call. Config, data and internal codes match the
/// command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BhStatus {
    Ok = 0,
    /// A required pointer was null, a string was not UTF-8, or a length was wrong.
    InvalidArgument = 1,
    Config = 2,
    Data = 3,
    Internal = 4,
    /// The library panicked; the handle arguments should be considered invalid.
    Panic = 5,
}

/// Georeferenced single-band grid.
pub struct BhRaster(RasterGrid);

/// Building footprint collection.
pub struct BhFootprints(FootprintSet);

/// Trained height model.
pub struct BhModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BhStatus::Ok,
        Ok(Err(Fail::Arg(m))) => {
            set_error(m);
            BhStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            match e.class() {
                ErrorClass::Config => BhStatus::Config,
                ErrorClass::Data => BhStatus::Data,
                ErrorClass::Internal => BhStatus::Internal,
            }
        }
        Err(_) => {
            set_error("panic inside bheight".into());
            BhStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::Arg(format!("{what} handle is null")))
}

unsafe fn out<T>(p: *mut T, what: &str) -> Result<&mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::Arg(format!("{what} output pointer is null")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated when `len > 0`). Returns the full message length without the
/// terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bh_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a raster from `rows * cols` row-major values; `origin_y` is the top edge.
///
/// # Safety
/// `values` must point to `rows * cols` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_new(
    rows: usize,
    cols: usize,
    origin_x: f64,
    origin_y: f64,
    pixel_size: f64,
    nodata: f32,
    values: *const f32,
    out_raster: *mut *mut BhRaster,
) -> BhStatus {
    guard(|| {
        let slot = out(out_raster, "raster")?;
        if values.is_null() {
            return Err(Fail::Arg("values is null".into()));
        }
        let g = GridGeometry::new(rows, cols, origin_x, origin_y, pixel_size)?;
        let data = std::slice::from_raw_parts(values, g.len()).to_vec();
        *slot = boxed(BhRaster(RasterGrid::new(g, nodata, data)?));
        Ok(())
    })
}

/// Reads a BHGR raster file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_read(path: *const c_char, out_raster: *mut *mut BhRaster) -> BhStatus {
    guard(|| {
        let slot = out(out_raster, "raster")?;
        let p = path_arg(path, "path")?;
        *slot = boxed(BhRaster(read_raster(p)?));
        Ok(())
    })
}

/// # Safety
/// `raster` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_write(raster: *const BhRaster, path: *const c_char) -> BhStatus {
    guard(|| {
        let r = handle(raster, "raster")?;
        write_raster(&r.0, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Writes the grid shape; either output pointer may be null.
///
/// # Safety
/// `raster` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_dims(raster: *const BhRaster, rows: *mut usize, cols: *mut usize) -> BhStatus {
    guard(|| {
        let g = *handle(raster, "raster")?.0.geometry();
        if let Some(r) = rows.as_mut() {
            *r = g.rows;
        }
        if let Some(c) = cols.as_mut() {
            *c = g.cols;
        }
        Ok(())
    })
}

/// # Safety
/// `raster` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_nodata(raster: *const BhRaster, nodata: *mut f32) -> BhStatus {
    guard(|| {
        *out(nodata, "nodata")? = handle(raster, "raster")?.0.nodata();
        Ok(())
    })
}

/// Copies the row-major values into `buf`, which must hold exactly `rows * cols` floats.
///
/// # Safety
/// `raster` must be a live handle; `buf` valid for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_copy_values(raster: *const BhRaster, buf: *mut f32, len: usize) -> BhStatus {
    guard(|| {
        let v = handle(raster, "raster")?.0.values();
        if buf.is_null() || len != v.len() {
            return Err(Fail::Arg(format!("buffer must hold {} values, got {len}", v.len())));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, len);
        Ok(())
    })
}

/// Moving-window median of size `window_m` meters into a new raster.
///
/// # Safety
/// `raster` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_window_median(
    raster: *const BhRaster,
    window_m: f64,
    out_raster: *mut *mut BhRaster,
) -> BhStatus {
    guard(|| {
        let slot = out(out_raster, "raster")?;
        let r = handle(raster, "raster")?;
        *slot = boxed(BhRaster(window_median(&r.0, window_m)?));
        Ok(())
    })
}

/// # Safety
/// `raster` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_raster_free(raster: *mut BhRaster) {
    if !raster.is_null() {
        drop(Box::from_raw(raster));
    }
}

/// Reads a GeoJSON FeatureCollection of footprints.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bh_footprints_read(path: *const c_char, out_set: *mut *mut BhFootprints) -> BhStatus {
    guard(|| {
        let slot = out(out_set, "footprints")?;
        *slot = boxed(BhFootprints(read_footprints(path_arg(path, "path")?)?));
        Ok(())
    })
}

/// Number of footprints, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bh_footprints_len(set: *const BhFootprints) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Shape features of every footprint, written to four arrays of `len` doubles
/// (width, length, orientation in degrees, near distance). Undefined values are NaN.
///
/// # Safety
/// `set` must be a live handle; each array valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bh_footprints_shape(
    set: *const BhFootprints,
    width_m: *mut f64,
    length_m: *mut f64,
    orientation_deg: *mut f64,
    near_m: *mut f64,
    len: usize,
) -> BhStatus {
    guard(|| {
        let s = &handle(set, "footprints")?.0;
        if len != s.len() {
            return Err(Fail::Arg(format!("arrays must hold {} values, got {len}", s.len())));
        }
        if width_m.is_null() || length_m.is_null() || orientation_deg.is_null() || near_m.is_null() {
            return Err(Fail::Arg("output array is null".into()));
        }
        for (i, f) in shape_features(s).into_iter().enumerate() {
            let (w, l, o) = f.mbg.map_or((f64::NAN, f64::NAN, f64::NAN), |m| (m.width_m, m.length_m, m.orientation_deg));
            *width_m.add(i) = w;
            *length_m.add(i) = l;
            *orientation_deg.add(i) = o;
            *near_m.add(i) = f.near_m.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_footprints_free(set: *mut BhFootprints) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Loads a JSON model written by training.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bh_model_load(path: *const c_char, out_model: *mut *mut BhModel) -> BhStatus {
    guard(|| {
        let slot = out(out_model, "model")?;
        *slot = boxed(BhModel(TrainedModel::load(path_arg(path, "path")?)?));
        Ok(())
    })
}

/// Number of input features, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bh_model_n_features(model: *const BhModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.features.len())
}

/// Name of feature `index` as a NUL-terminated string owned by the model,
/// or null when out of range.
///
/// # Safety
/// `model` must be null or a live handle. The returned pointer lives until
/// the next call on this thread.
#[no_mangle]
pub unsafe extern "C" fn bh_model_feature_name(model: *const BhModel, index: usize) -> *const c_char {
    thread_local! {
        static NAME: RefCell<CString> = RefCell::new(CString::default());
    }
    let Some(name) = model.as_ref().and_then(|m| m.0.features.get(index)) else {
        return ptr::null();
    };
    NAME.with(|n| {
        *n.borrow_mut() = CString::new(name.as_str()).unwrap_or_default();
        n.borrow().as_ptr()
    })
}

/// Predicts one row given in model feature order. The output is in the
/// model's target units (log height for pipeline models).
///
/// # Safety
/// `model` must be a live handle; `row` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bh_model_predict_row(
    model: *const BhModel,
    row: *const f64,
    len: usize,
    out_value: *mut f64,
) -> BhStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let slot = out(out_value, "value")?;
        if row.is_null() {
            return Err(Fail::Arg("row is null".into()));
        }
        *slot = m.0.predict(std::slice::from_raw_parts(row, len))?;
        Ok(())
    })
}

/// Height raster in meters from a feature directory: per-pixel prediction,
/// `window_m` moving median (0 disables it), exponentiation and masking to
/// building pixels. A null `footprints` produces the unmasked surface.
///
/// # Safety
/// `model` must be a live handle, `footprints` null or live, `feature_dir`
/// a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bh_model_predict_raster(
    model: *const BhModel,
    feature_dir: *const c_char,
    footprints: *const BhFootprints,
    window_m: f64,
    out_raster: *mut *mut BhRaster,
) -> BhStatus {
    guard(|| {
        let slot = out(out_raster, "raster")?;
        let m = handle(model, "model")?;
        let features = read_feature_dir(path_arg(feature_dir, "feature_dir")?)?;
        let fps = footprints.as_ref().map(|f| &f.0);
        *slot = boxed(BhRaster(pipeline::predict_raster(&m.0, &features, fps, window_m, fps.is_none())?));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_model_free(model: *mut BhModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the training stage for a JSON pipeline config, writing its outputs
/// to the configured output directory.
///
/// # Safety
/// `config_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bh_pipeline_train(config_path: *const c_char) -> BhStatus {
    guard(|| {
        let cfg = PipelineConfig::load(path_arg(config_path, "config_path")?)?;
        pipeline::cmd_train(&cfg)?;
        Ok(())
    })
}
