//! GeoJSON FeatureCollection input/output for footprints and regions.
//! Coordinates are taken as planar meters.

use std::path::Path;

use serde_json::{json, Value};

use super::{Footprint, FootprintSet, Point, Polygon};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    pub polygon: Polygon,
}

fn bad(i: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("feature {i}: {msg}"))
}

fn parse_ring(i: usize, v: &Value) -> Result<Vec<Point>> {
    let arr = v.as_array().ok_or_else(|| bad(i, "ring is not an array"))?;
    arr.iter()
        .map(|c| {
            let xy = c.as_array().filter(|a| a.len() >= 2).ok_or_else(|| bad(i, "position needs [x, y]"))?;
            let x = xy[0].as_f64().ok_or_else(|| bad(i, "x is not a number"))?;
            let y = xy[1].as_f64().ok_or_else(|| bad(i, "y is not a number"))?;
            Ok(Point::new(x, y))
        })
        .collect()
}

fn parse_polygon(i: usize, geom: &Value) -> Result<Polygon> {
    let ty = geom.get("type").and_then(Value::as_str).unwrap_or("");
    match ty {
        "Polygon" => {}
        "MultiPolygon" => return Err(bad(i, "MultiPolygon geometries are not supported; split them into Polygon features")),
        other => return Err(bad(i, format!("expected Polygon geometry, found {other:?}"))),
    }
    let rings = geom
        .get("coordinates")
        .and_then(Value::as_array)
        .filter(|r| !r.is_empty())
        .ok_or_else(|| bad(i, "Polygon has no rings"))?;
    let exterior = parse_ring(i, &rings[0])?;
    let holes = rings[1..].iter().map(|r| parse_ring(i, r)).collect::<Result<Vec<_>>>()?;
    Polygon::new(exterior, holes).map_err(|e| bad(i, e))
}

fn features(doc: &Value) -> Result<&Vec<Value>> {
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Data("expected a GeoJSON FeatureCollection".into()));
    }
    doc.get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Data("FeatureCollection has no features array".into()))
}

fn feature_id(i: usize, f: &Value) -> Result<String> {
    f.get("properties")
        .and_then(|p| p.get("id"))
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| bad(i, "missing string property `id`"))
}

pub fn footprints_from_geojson(text: &str) -> Result<FootprintSet> {
    let doc: Value = serde_json::from_str(text)?;
    let mut out = Vec::new();
    for (i, f) in features(&doc)?.iter().enumerate() {
        let id = feature_id(i, f)?;
        let geom = f.get("geometry").ok_or_else(|| bad(i, "missing geometry"))?;
        let polygon = parse_polygon(i, geom)?;
        let h = match f.get("properties").and_then(|p| p.get("ref_height_m")) {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| bad(i, "ref_height_m is not a number"))?),
        };
        out.push(Footprint::new(id, polygon, h).map_err(|e| bad(i, e))?);
    }
    FootprintSet::new(out)
}

fn ring_json(ring: &[Point]) -> Value {
    let mut coords: Vec<Value> = ring.iter().map(|p| json!([p.x, p.y])).collect();
    if let Some(first) = ring.first() {
        coords.push(json!([first.x, first.y]));
    }
    Value::Array(coords)
}

fn polygon_json(p: &Polygon) -> Value {
    let rings: Vec<Value> = p.rings().map(ring_json).collect();
    json!({"type": "Polygon", "coordinates": rings})
}

pub fn footprints_to_geojson(set: &FootprintSet) -> Value {
    let feats: Vec<Value> = set
        .iter()
        .map(|f| {
            let mut props = serde_json::Map::new();
            props.insert("id".into(), json!(f.id));
            if let Some(h) = f.ref_height_m {
                props.insert("ref_height_m".into(), json!(h));
            }
            json!({"type": "Feature", "properties": props, "geometry": polygon_json(&f.polygon)})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": feats})
}

pub fn regions_to_geojson(regions: &[Region]) -> Value {
    let feats: Vec<Value> = regions
        .iter()
        .map(|r| json!({"type": "Feature", "properties": {"id": r.id}, "geometry": polygon_json(&r.polygon)}))
        .collect();
    json!({"type": "FeatureCollection", "features": feats})
}

pub fn read_footprints(path: impl AsRef<Path>) -> Result<FootprintSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    footprints_from_geojson(&text)
}

pub fn write_footprints(set: &FootprintSet, path: impl AsRef<Path>) -> Result<()> {
    write_json(&footprints_to_geojson(set), path)
}

pub fn write_regions(regions: &[Region], path: impl AsRef<Path>) -> Result<()> {
    write_json(&regions_to_geojson(regions), path)
}

fn write_json(v: &Value, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(v)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn regions_from_geojson(text: &str) -> Result<Vec<Region>> {
    let doc: Value = serde_json::from_str(text)?;
    let mut out = Vec::new();
    for (i, f) in features(&doc)?.iter().enumerate() {
        let id = feature_id(i, f)?;
        let geom = f.get("geometry").ok_or_else(|| bad(i, "missing geometry"))?;
        out.push(Region {
            id,
            polygon: parse_polygon(i, geom)?,
        });
    }
    Ok(out)
}

pub fn read_regions(path: impl AsRef<Path>) -> Result<Vec<Region>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    regions_from_geojson(&text)
}
