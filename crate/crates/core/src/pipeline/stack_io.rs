use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{read_raster, write_raster, LayerLabel, RasterStack};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackLayer {
    pub band: String,
    pub timestamp: String,
    /// Raster file, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub layers: Vec<StackLayer>,
}

pub fn read_stack(manifest: impl AsRef<Path>) -> Result<RasterStack> {
    let manifest = manifest.as_ref();
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let m: StackManifest = serde_json::from_str(&text)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    if m.layers.is_empty() {
        return Err(Error::Data(format!("{}: stack has no layers", manifest.display())));
    }
    let mut labels = Vec::with_capacity(m.layers.len());
    let mut grids = Vec::with_capacity(m.layers.len());
    for l in &m.layers {
        grids.push(read_raster(base.join(&l.path))?);
        labels.push(LayerLabel {
            band: l.band.clone(),
            timestamp: l.timestamp.clone(),
        });
    }
    let geom = *grids[0].geometry();
    RasterStack::new(geom, labels, grids)
}

/// Writes every layer as `<band>_<timestamp>.bhgr` next to `manifest`.
pub fn write_stack(stack: &RasterStack, manifest: impl AsRef<Path>) -> Result<()> {
    let manifest = manifest.as_ref();
    let dir = manifest.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layers = Vec::new();
    for (label, grid) in stack.labels().iter().zip(stack.layers()) {
        let file = PathBuf::from(format!("{}_{}.bhgr", label.band, label.timestamp));
        write_raster(grid, dir.join(&file))?;
        layers.push(StackLayer {
            band: label.band.clone(),
            timestamp: label.timestamp.clone(),
            path: file,
        });
    }
    let text = serde_json::to_string_pretty(&StackManifest { layers })?;
    std::fs::write(manifest, text).map_err(|e| Error::io(manifest, e))
}
