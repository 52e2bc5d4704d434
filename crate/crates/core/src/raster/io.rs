//! "BHGR v1" binary raster files.
//!
//! Little-endian layout: magic `BHGR`, u16 version, u32 rows, u32 cols,
//! f64 origin_x, f64 origin_y, f64 pixel_size, f32 nodata, then rows*cols
//! f32 values row-major from the top row. No padding, no compression.

use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{GridGeometry, RasterGrid};
use crate::error::{Error, Result};

pub const BHGR_MAGIC: [u8; 4] = *b"BHGR";
pub const BHGR_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 + 8 + 8 + 4;

pub fn encode_raster(grid: &RasterGrid) -> Vec<u8> {
    let g = grid.geometry();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * g.len());
    out.extend_from_slice(&BHGR_MAGIC);
    // Writes into a Vec cannot fail.
    out.write_u16::<LittleEndian>(BHGR_VERSION).unwrap();
    out.write_u32::<LittleEndian>(g.rows as u32).unwrap();
    out.write_u32::<LittleEndian>(g.cols as u32).unwrap();
    out.write_f64::<LittleEndian>(g.origin_x).unwrap();
    out.write_f64::<LittleEndian>(g.origin_y).unwrap();
    out.write_f64::<LittleEndian>(g.pixel_size).unwrap();
    out.write_f32::<LittleEndian>(grid.nodata()).unwrap();
    for &v in grid.values() {
        out.write_f32::<LittleEndian>(v).unwrap();
    }
    out
}

fn truncated(offset: usize, what: &str) -> Error {
    Error::Format {
        offset: offset as u64,
        message: format!("file truncated while reading {what}"),
    }
}

pub fn decode_raster(bytes: &[u8]) -> Result<RasterGrid> {
    if bytes.len() < 4 {
        return Err(truncated(bytes.len(), "magic"));
    }
    if bytes[..4] != BHGR_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {:02x?}", &bytes[..4]),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(bytes.len(), "header"));
    }
    let version = LittleEndian::read_u16(&bytes[4..6]);
    if version != BHGR_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let rows = LittleEndian::read_u32(&bytes[6..10]) as usize;
    let cols = LittleEndian::read_u32(&bytes[10..14]) as usize;
    let origin_x = LittleEndian::read_f64(&bytes[14..22]);
    let origin_y = LittleEndian::read_f64(&bytes[22..30]);
    let pixel_size = LittleEndian::read_f64(&bytes[30..38]);
    let nodata = LittleEndian::read_f32(&bytes[38..42]);
    let geometry = GridGeometry {
        rows,
        cols,
        origin_x,
        origin_y,
        pixel_size,
    };
    geometry.validate().map_err(|e| Error::Format {
        offset: 6,
        message: e.to_string(),
    })?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format {
            offset: 6,
            message: "rows*cols overflows".into(),
        })?;
    let expected = HEADER_LEN + 4 * n;
    if bytes.len() < expected {
        // Offset of the first value that is incomplete.
        let complete = (bytes.len() - HEADER_LEN) / 4;
        return Err(truncated(HEADER_LEN + 4 * complete, &format!("value {complete} of {n}")));
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            offset: expected as u64,
            message: format!("{} trailing bytes", bytes.len() - expected),
        });
    }
    let mut values = vec![0f32; n];
    LittleEndian::read_f32_into(&bytes[HEADER_LEN..expected], &mut values);
    RasterGrid::new(geometry, nodata, values)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raster(&bytes)
}

pub fn write_raster(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_raster(grid);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}
