//! Building height estimation at 10 m resolution from multi-temporal SAR and
//! optical raster stacks plus building footprints.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod explain;
pub mod geometry;
pub mod models;
pub mod pipeline;
pub mod raster;
pub mod sampling;
pub mod spectral;
pub mod stats;

pub use error::{Error, ErrorClass, Result};
