#ifndef BHEIGHT_H
#define BHEIGHT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Config, data and internal codes match the
 * command-line exit codes.
 */
typedef enum BhStatus {
  BH_STATUS_OK = 0,
  /**
   * A required pointer was null, a string was not UTF-8, or a length was wrong.
   */
  BH_STATUS_INVALID_ARGUMENT = 1,
  BH_STATUS_CONFIG = 2,
  BH_STATUS_DATA = 3,
  BH_STATUS_INTERNAL = 4,
  /**
   * The library panicked; the handle arguments should be considered invalid.
   */
  BH_STATUS_PANIC = 5,
} BhStatus;

/**
 * Building footprint collection.
 */
typedef struct BhFootprints BhFootprints;

/**
 * Trained height model.
 */
typedef struct BhModel BhModel;

/**
 * Georeferenced single-band grid.
 */
typedef struct BhRaster BhRaster;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bh_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated when `len > 0`). Returns the full message length without the
 * terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t bh_last_error_message(char *buf, size_t len);

/**
 * Creates a raster from `rows * cols` row-major values; `origin_y` is the top edge.
 *
 * # Safety
 * `values` must point to `rows * cols` floats; `out` must be writable.
 */
enum BhStatus bh_raster_new(size_t rows,
                            size_t cols,
                            double origin_x,
                            double origin_y,
                            double pixel_size,
                            float nodata,
                            const float *values,
                            struct BhRaster **out_raster);

/**
 * Reads a BHGR raster file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BhStatus bh_raster_read(const char *path, struct BhRaster **out_raster);

/**
 * # Safety
 * `raster` must be a live handle; `path` a NUL-terminated string.
 */
enum BhStatus bh_raster_write(const struct BhRaster *raster, const char *path);

/**
 * Writes the grid shape; either output pointer may be null.
 *
 * # Safety
 * `raster` must be a live handle.
 */
enum BhStatus bh_raster_dims(const struct BhRaster *raster, size_t *rows, size_t *cols);

/**
 * # Safety
 * `raster` must be a live handle.
 */
enum BhStatus bh_raster_nodata(const struct BhRaster *raster, float *nodata);

/**
 * Copies the row-major values into `buf`, which must hold exactly `rows * cols` floats.
 *
 * # Safety
 * `raster` must be a live handle; `buf` valid for `len` floats.
 */
enum BhStatus bh_raster_copy_values(const struct BhRaster *raster, float *buf, size_t len);

/**
 * Moving-window median of size `window_m` meters into a new raster.
 *
 * # Safety
 * `raster` must be a live handle; `out` writable.
 */
enum BhStatus bh_raster_window_median(const struct BhRaster *raster,
                                      double window_m,
                                      struct BhRaster **out_raster);

/**
 * # Safety
 * `raster` must be null or a handle not yet freed.
 */
void bh_raster_free(struct BhRaster *raster);

/**
 * Reads a GeoJSON FeatureCollection of footprints.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` writable.
 */
enum BhStatus bh_footprints_read(const char *path, struct BhFootprints **out_set);

/**
 * Number of footprints, or 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t bh_footprints_len(const struct BhFootprints *set);

/**
 * Shape features of every footprint, written to four arrays of `len` doubles
 * (width, length, orientation in degrees, near distance). Undefined values are NaN.
 *
 * # Safety
 * `set` must be a live handle; each array valid for `len` doubles.
 */
enum BhStatus bh_footprints_shape(const struct BhFootprints *set,
                                  double *width_m,
                                  double *length_m,
                                  double *orientation_deg,
                                  double *near_m,
                                  size_t len);

/**
 * # Safety
 * `set` must be null or a handle not yet freed.
 */
void bh_footprints_free(struct BhFootprints *set);

/**
 * Loads a JSON model written by training.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` writable.
 */
enum BhStatus bh_model_load(const char *path, struct BhModel **out_model);

/**
 * Number of input features, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t bh_model_n_features(const struct BhModel *model);

/**
 * Name of feature `index` as a NUL-terminated string owned by the model,
 * or null when out of range.
 *
 * # Safety
 * `model` must be null or a live handle. The returned pointer lives until
 * the next call on this thread.
 */
const char *bh_model_feature_name(const struct BhModel *model, size_t index);

/**
 * Predicts one row given in model feature order. The output is in the
 * model's target units (log height for pipeline models).
 *
 * # Safety
 * `model` must be a live handle; `row` valid for `len` doubles.
 */
enum BhStatus bh_model_predict_row(const struct BhModel *model,
                                   const double *row,
                                   size_t len,
                                   double *out_value);

/**
 * Height raster in meters from a feature directory: per-pixel prediction,
 * `window_m` moving median (0 disables it), exponentiation and masking to
 * building pixels. A null `footprints` produces the unmasked surface.
 *
 * # Safety
 * `model` must be a live handle, `footprints` null or live, `feature_dir`
 * a NUL-terminated string and `out` writable.
 */
enum BhStatus bh_model_predict_raster(const struct BhModel *model,
                                      const char *feature_dir,
                                      const struct BhFootprints *footprints,
                                      double window_m,
                                      struct BhRaster **out_raster);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void bh_model_free(struct BhModel *model);

/**
 * Runs the training stage for a JSON pipeline config, writing its outputs
 * to the configured output directory.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string.
 */
enum BhStatus bh_pipeline_train(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BHEIGHT_H */
