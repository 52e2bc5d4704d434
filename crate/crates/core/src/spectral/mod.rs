//! Spectral and SAR indices, per-pixel temporal statistics, and the named
//! feature-raster database built from them.

mod kernels;

pub use kernels::{normalized_difference, series_stat, temporal_stat, temporal_stats, vvh_index, EPS_DIV, EPS_VAR};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{shape_features, FootprintSet, GeometryFeature};
use crate::raster::{self, GridGeometry, RasterGrid, RasterStack};

/// Temporal reduction applied to a per-date signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatKind {
    #[serde(rename = "p0")]
    Min,
    #[serde(rename = "p100")]
    Max,
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "median")]
    Median,
    #[serde(rename = "stdDev")]
    StdDev,
    #[serde(rename = "skew")]
    Skewness,
    #[serde(rename = "kurtosis")]
    Kurtosis,
    #[serde(rename = "p10")]
    P10,
    #[serde(rename = "p25")]
    P25,
    #[serde(rename = "p75")]
    P75,
    #[serde(rename = "p90")]
    P90,
    #[serde(rename = "interquartile_range")]
    InterquartileRange,
}

impl StatKind {
    pub const ALL: [StatKind; 12] = [
        StatKind::Min,
        StatKind::Max,
        StatKind::Mean,
        StatKind::Median,
        StatKind::StdDev,
        StatKind::Skewness,
        StatKind::Kurtosis,
        StatKind::P10,
        StatKind::P25,
        StatKind::P75,
        StatKind::P90,
        StatKind::InterquartileRange,
    ];

    /// Suffix used in feature names, e.g. `NDVI_skew`.
    pub fn name(self) -> &'static str {
        match self {
            StatKind::Min => "p0",
            StatKind::Max => "p100",
            StatKind::Mean => "mean",
            StatKind::Median => "median",
            StatKind::StdDev => "stdDev",
            StatKind::Skewness => "skew",
            StatKind::Kurtosis => "kurtosis",
            StatKind::P10 => "p10",
            StatKind::P25 => "p25",
            StatKind::P75 => "p75",
            StatKind::P90 => "p90",
            StatKind::InterquartileRange => "interquartile_range",
        }
    }

    pub fn parse(s: &str) -> Option<StatKind> {
        Some(match s {
            "p0" | "min" => StatKind::Min,
            "p100" | "max" => StatKind::Max,
            "mean" => StatKind::Mean,
            "median" | "p50" => StatKind::Median,
            "stdDev" | "std" => StatKind::StdDev,
            "skew" | "skewness" => StatKind::Skewness,
            "kurtosis" => StatKind::Kurtosis,
            "p10" => StatKind::P10,
            "p25" => StatKind::P25,
            "p75" => StatKind::P75,
            "p90" => StatKind::P90,
            "interquartile_range" | "interquatile_range" | "iqr" => StatKind::InterquartileRange,
            _ => return None,
        })
    }
}

/// Index signals computed per date from band roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Mndwi,
    Ndvi,
    Ndwi,
    Lswi,
    Ndbi,
    Vvh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandRole {
    Green,
    Red,
    Nir,
    Swir,
    Vv,
    Vh,
}

impl IndexKind {
    pub const ALL: [IndexKind; 6] = [
        IndexKind::Mndwi,
        IndexKind::Ndvi,
        IndexKind::Ndwi,
        IndexKind::Lswi,
        IndexKind::Ndbi,
        IndexKind::Vvh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Mndwi => "MNDWI",
            IndexKind::Ndvi => "NDVI",
            IndexKind::Ndwi => "NDWI",
            IndexKind::Lswi => "LSWI",
            IndexKind::Ndbi => "NDBI",
            IndexKind::Vvh => "VVH",
        }
    }

    pub fn parse(s: &str) -> Option<IndexKind> {
        IndexKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Input roles in formula order: `(first, second)`.
    pub fn inputs(self) -> (BandRole, BandRole) {
        use BandRole::*;
        match self {
            IndexKind::Mndwi => (Green, Swir),
            IndexKind::Ndvi => (Nir, Red),
            IndexKind::Ndwi => (Green, Nir),
            IndexKind::Lswi => (Nir, Swir),
            IndexKind::Ndbi => (Swir, Nir),
            IndexKind::Vvh => (Vv, Vh),
        }
    }
}

/// Which stack band label plays each role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandMap {
    pub green: String,
    pub red: String,
    pub nir: String,
    pub swir: String,
    pub vv: String,
    pub vh: String,
}

impl Default for BandMap {
    fn default() -> Self {
        BandMap {
            green: "B3".into(),
            red: "B4".into(),
            nir: "B8".into(),
            swir: "B11".into(),
            vv: "VV".into(),
            vh: "VH".into(),
        }
    }
}

impl BandMap {
    pub fn band(&self, role: BandRole) -> &str {
        match role {
            BandRole::Green => &self.green,
            BandRole::Red => &self.red,
            BandRole::Nir => &self.nir,
            BandRole::Swir => &self.swir,
            BandRole::Vv => &self.vv,
            BandRole::Vh => &self.vh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeEntry {
    pub signal: String,
    pub stat: StatKind,
}

impl RecipeEntry {
    pub fn new(signal: impl Into<String>, stat: StatKind) -> Self {
        RecipeEntry {
            signal: signal.into(),
            stat,
        }
    }

    pub fn feature_name(&self) -> String {
        format!("{}_{}", self.signal, self.stat.name())
    }
}

/// Signals of the default recipe.
pub const DEFAULT_SIGNALS: [&str; 13] = [
    "B3", "B4", "B8", "B5", "B6", "NDVI", "NDWI", "MNDWI", "LSWI", "NDBI", "VV", "VH", "VVH",
];

pub const DEFAULT_GAMMA: f64 = 10.0;

/// What goes into the feature database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureRecipe {
    pub entries: Vec<RecipeEntry>,
    pub geometry: Vec<GeometryFeature>,
    pub gamma: f64,
    pub bands: BandMap,
}

impl Default for FeatureRecipe {
    /// 13 signals x 12 statistics + 4 footprint shape features = 160.
    fn default() -> Self {
        let entries = DEFAULT_SIGNALS
            .iter()
            .flat_map(|s| StatKind::ALL.iter().map(move |&k| RecipeEntry::new(*s, k)))
            .collect();
        FeatureRecipe {
            entries,
            geometry: GeometryFeature::ALL.to_vec(),
            gamma: DEFAULT_GAMMA,
            bands: BandMap::default(),
        }
    }
}

impl FeatureRecipe {
    pub fn empty() -> Self {
        FeatureRecipe {
            entries: vec![],
            geometry: vec![],
            gamma: DEFAULT_GAMMA,
            bands: BandMap::default(),
        }
    }

    /// Feature names in recipe order: temporal entries, then shape features.
    pub fn feature_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(RecipeEntry::feature_name)
            .chain(self.geometry.iter().map(|g| g.name().to_string()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.feature_names();
        let mut seen = std::collections::HashSet::new();
        let dups: Vec<String> = names.iter().filter(|n| !seen.insert(n.as_str())).map(|n| format!("duplicate feature {n}")).collect();
        if !dups.is_empty() {
            return Err(Error::Recipe(dups));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Parameter(format!("VVH gamma must be > 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Ordered, named feature grids sharing one geometry.
#[derive(Debug, Clone, Default)]
pub struct FeatureRasters {
    names: Vec<String>,
    grids: Vec<RasterGrid>,
}

impl FeatureRasters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, grid: RasterGrid) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::Validation(format!("duplicate feature raster {name}")));
        }
        if let Some(first) = self.grids.first() {
            first.geometry().ensure_aligned(grid.geometry())?;
        }
        self.names.push(name);
        self.grids.push(grid);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<&RasterGrid> {
        self.names.iter().position(|n| n == name).map(|i| &self.grids[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RasterGrid)> {
        self.names.iter().map(String::as_str).zip(&self.grids)
    }

    pub fn geometry(&self) -> Option<&GridGeometry> {
        self.grids.first().map(RasterGrid::geometry)
    }

    /// Only the named features, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureRasters> {
        let missing: Vec<&String> = names.iter().filter(|n| self.get(n).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!("feature rasters missing: {missing:?}")));
        }
        let mut out = FeatureRasters::new();
        for n in names {
            out.push(n.clone(), self.get(n).unwrap().clone())?;
        }
        Ok(out)
    }
}

fn find_band<'a>(stacks: &'a [RasterStack], band: &str) -> Option<Vec<(&'a str, &'a RasterGrid)>> {
    stacks.iter().find(|s| s.has_band(band)).map(|s| {
        s.band_layers(band)
            .into_iter()
            .map(|(l, g)| (l.timestamp.as_str(), g))
            .collect()
    })
}

/// Per-date grids of a signal: a raw band, or an index computed date by date.
fn resolve_signal(stacks: &[RasterStack], signal: &str, recipe: &FeatureRecipe) -> std::result::Result<Vec<RasterGrid>, String> {
    if let Some(layers) = find_band(stacks, signal) {
        return Ok(layers.into_iter().map(|(_, g)| g.clone()).collect());
    }
    let Some(kind) = IndexKind::parse(signal) else {
        return Err(format!("{signal}: not a stack band or known index"));
    };
    let (ra, rb) = kind.inputs();
    let (na, nb) = (recipe.bands.band(ra), recipe.bands.band(rb));
    let a = find_band(stacks, na).ok_or_else(|| format!("{signal}: band {na} missing from stacks"))?;
    let b = find_band(stacks, nb).ok_or_else(|| format!("{signal}: band {nb} missing from stacks"))?;
    let b_by_date: BTreeMap<&str, &RasterGrid> = b.into_iter().collect();
    let mut out = Vec::new();
    for (date, ga) in a {
        let Some(gb) = b_by_date.get(date) else {
            return Err(format!("{signal}: band {nb} has no layer dated {date}"));
        };
        let grid = match kind {
            IndexKind::Vvh => vvh_index(ga, gb, recipe.gamma),
            _ => normalized_difference(ga, gb),
        }
        .map_err(|e| format!("{signal}@{date}: {e}"))?;
        out.push(grid);
    }
    if out.is_empty() {
        return Err(format!("{signal}: no dated layers"));
    }
    Ok(out)
}

/// Compute every recipe entry as a named grid. Shape features are burned
/// onto the pixels of each footprint and need `footprints`.
pub fn build_feature_rasters(
    stacks: &[RasterStack],
    recipe: &FeatureRecipe,
    footprints: Option<&FootprintSet>,
) -> Result<FeatureRasters> {
    recipe.validate()?;
    let geom = match stacks.first() {
        Some(s) => *s.geometry(),
        None if recipe.entries.is_empty() && recipe.geometry.is_empty() => return Ok(FeatureRasters::new()),
        None => return Err(Error::Recipe(vec!["no raster stacks supplied".into()])),
    };
    for s in stacks {
        geom.ensure_aligned(s.geometry())?;
    }
    let nodata = stacks[0].layers().first().map(|l| l.nodata()).unwrap_or(raster::DEFAULT_NODATA);

    // Group statistics by signal so each series is sorted once per pixel.
    let mut signals: Vec<&str> = Vec::new();
    let mut by_signal: BTreeMap<&str, Vec<StatKind>> = BTreeMap::new();
    for e in &recipe.entries {
        if !by_signal.contains_key(e.signal.as_str()) {
            signals.push(&e.signal);
        }
        by_signal.entry(&e.signal).or_default().push(e.stat);
    }

    let mut failures = Vec::new();
    let mut computed: BTreeMap<String, RasterGrid> = BTreeMap::new();
    for sig in signals {
        match resolve_signal(stacks, sig, recipe) {
            Ok(per_date) => {
                let refs: Vec<&RasterGrid> = per_date.iter().collect();
                let stats = &by_signal[sig];
                for (stat, grid) in stats.iter().zip(temporal_stats(&refs, stats)?) {
                    computed.insert(RecipeEntry::new(sig, *stat).feature_name(), grid);
                }
            }
            Err(msg) => failures.push(msg),
        }
    }
    if !recipe.geometry.is_empty() && footprints.is_none() {
        failures.extend(recipe.geometry.iter().map(|g| format!("{}: shape features need footprints", g.name())));
    }
    if !failures.is_empty() {
        return Err(Error::Recipe(failures));
    }

    let mut out = FeatureRasters::new();
    for e in &recipe.entries {
        let name = e.feature_name();
        let grid = computed.remove(&name).expect("computed above");
        out.push(name, grid)?;
    }
    if let (Some(fps), false) = (footprints, recipe.geometry.is_empty()) {
        let shapes = shape_features(fps);
        let cells: Vec<Vec<usize>> = fps.iter().map(|f| raster::rasterize_indices(&f.polygon, &geom)).collect();
        for feat in &recipe.geometry {
            let mut vals = vec![nodata; geom.len()];
            for (shape, pix) in shapes.iter().zip(&cells) {
                if let Some(v) = feat.value(shape) {
                    for &i in pix {
                        vals[i] = v as f32;
                    }
                }
            }
            out.push(feat.name(), RasterGrid::new(geom, nodata, vals)?)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    features: Vec<String>,
}

/// Write one `<feature>.bhgr` per grid plus `manifest.json` listing names in order.
pub fn write_feature_dir(features: &FeatureRasters, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, grid) in features.iter() {
        raster::write_raster(grid, dir.join(format!("{name}.bhgr")))?;
    }
    let manifest = Manifest {
        features: features.names().to_vec(),
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

pub fn read_feature_dir(dir: impl AsRef<Path>) -> Result<FeatureRasters> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut out = FeatureRasters::new();
    for name in manifest.features {
        let grid = raster::read_raster(dir.join(format!("{name}.bhgr")))?;
        out.push(name, grid)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{LayerLabel, DEFAULT_NODATA};

    fn geom() -> GridGeometry {
        GridGeometry::new(2, 2, 0.0, 20.0, 10.0).unwrap()
    }

    fn two_date_stack() -> RasterStack {
        let g = geom();
        let lab = |b: &str, t: &str| LayerLabel {
            band: b.into(),
            timestamp: t.into(),
        };
        let f = |v: f32| RasterGrid::filled(g, v, DEFAULT_NODATA);
        RasterStack::new(
            g,
            vec![lab("B8", "t1"), lab("B8", "t2"), lab("B4", "t1"), lab("B4", "t2")],
            vec![f(0.8), f(0.6), f(0.4), f(0.2)],
        )
        .unwrap()
    }

    #[test]
    fn default_recipe_has_160_features() {
        let r = FeatureRecipe::default();
        assert_eq!(r.feature_names().len(), 160);
        r.validate().unwrap();
        assert!(r.feature_names().contains(&"NDVI_skew".to_string()));
        assert!(r.feature_names().contains(&"VVH_stdDev".to_string()));
        assert!(r.feature_names().contains(&"MBG_Width".to_string()));
    }

    #[test]
    fn ndvi_mean_over_two_dates() {
        let mut r = FeatureRecipe::empty();
        r.entries.push(RecipeEntry::new("NDVI", StatKind::Mean));
        let out = build_feature_rasters(&[two_date_stack()], &r, None).unwrap();
        assert_eq!(out.names(), &["NDVI_mean".to_string()]);
        let expect = ((0.8 - 0.4) / 1.2 + (0.6 - 0.2) / 0.8) / 2.0;
        let got = out.get("NDVI_mean").unwrap().values()[0] as f64;
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn empty_recipe_is_empty_map() {
        let out = build_feature_rasters(&[two_date_stack()], &FeatureRecipe::empty(), None).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn unresolvable_entries_are_all_listed() {
        let mut r = FeatureRecipe::empty();
        r.entries.push(RecipeEntry::new("MNDWI", StatKind::Mean));
        r.entries.push(RecipeEntry::new("XYZ", StatKind::Mean));
        r.geometry.push(GeometryFeature::MbgWidth);
        match build_feature_rasters(&[two_date_stack()], &r, None) {
            Err(Error::Recipe(list)) => assert_eq!(list.len(), 3, "{list:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stat_names_round_trip() {
        for s in StatKind::ALL {
            assert_eq!(StatKind::parse(s.name()), Some(s));
        }
    }
}
