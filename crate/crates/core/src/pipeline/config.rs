use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ForestParams;
use crate::spectral::FeatureRecipe;

/// Settings for the three importance runs that feed feature selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    /// Trees in the full-feature forest used only for importance.
    pub trees: usize,
    pub repeats: usize,
    /// Rows explained for the Shapley report (drawn from the training bins).
    pub shapley_rows: usize,
    pub shapley_background: usize,
    pub shapley_samples: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            trees: 100,
            repeats: 5,
            shapley_rows: 20,
            shapley_background: 10,
            shapley_samples: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub k: usize,
    /// Weights for the rf_vi, permutation and shapley reports, in that order.
    pub weights: Vec<f64>,
    /// Features always kept, ahead of the ranked ones.
    pub overrides: Vec<String>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: 13,
            weights: vec![1.0, 1.0, 1.0],
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Stack manifests (JSON listing band, timestamp and raster path per layer).
    pub stacks: Vec<PathBuf>,
    pub footprints: Option<PathBuf>,
    /// Normalized surface model giving reference heights; when absent the
    /// footprints' `ref_height_m` attribute is used.
    pub ndsm: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    /// Feature raster directory written by `features` and read by later stages.
    pub features_dir: PathBuf,
    /// Where train / predict / evaluate write their outputs.
    pub out_dir: PathBuf,
    pub recipe: FeatureRecipe,
    pub buffer_m: f64,
    /// Moving-window size for prediction smoothing; 0 disables it.
    pub window_m: f64,
    pub clip: [f64; 2],
    pub bin_step: f64,
    pub forest: ForestParams,
    pub importance: ImportanceConfig,
    pub selection: SelectionConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stacks: Vec::new(),
            footprints: None,
            ndsm: None,
            regions: None,
            features_dir: PathBuf::from("features"),
            out_dir: PathBuf::from("out"),
            recipe: FeatureRecipe::default(),
            buffer_m: 50.0,
            window_m: 50.0,
            clip: [1.0, 99.0],
            bin_step: 0.01,
            forest: ForestParams::default(),
            importance: ImportanceConfig::default(),
            selection: SelectionConfig::default(),
            seed: 42,
        }
    }
}

/// Named sub-seed streams derived from the master seed.
#[derive(Debug, Clone, Copy)]
pub enum SeedStream {
    Train = 1,
    Split = 2,
    Importance = 3,
    Synth = 4,
    Compare = 5,
}

impl PipelineConfig {
    pub fn stream_seed(&self, s: SeedStream) -> u64 {
        crate::models::sub_seed(self.seed, s as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_m >= 0.0) || !self.buffer_m.is_finite() {
            return Err(Error::Config(format!("buffer_m must be >= 0, got {}", self.buffer_m)));
        }
        if !(self.window_m >= 0.0) || !self.window_m.is_finite() {
            return Err(Error::Config(format!("window_m must be >= 0, got {}", self.window_m)));
        }
        let [lo, hi] = self.clip;
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(Error::Config(format!("clip must satisfy 0 <= lo < hi <= 100, got {lo}..{hi}")));
        }
        if !(self.bin_step > 0.0) {
            return Err(Error::Config(format!("bin_step must be > 0, got {}", self.bin_step)));
        }
        if self.selection.k == 0 {
            return Err(Error::Config("selection.k must be >= 1".into()));
        }
        if self.selection.weights.len() != 3 {
            return Err(Error::Config("selection.weights needs 3 entries (rf_vi, permutation, shapley)".into()));
        }
        if self.forest.n_trees == 0 || self.importance.trees == 0 {
            return Err(Error::Config("tree counts must be >= 1".into()));
        }
        self.recipe.validate()
    }

    /// Reads a JSON config; relative paths inside are resolved against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.stacks.iter_mut().for_each(fix);
        [&mut self.footprints, &mut self.ndsm, &mut self.regions].into_iter().flatten().for_each(fix);
        fix(&mut self.features_dir);
        fix(&mut self.out_dir);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}
