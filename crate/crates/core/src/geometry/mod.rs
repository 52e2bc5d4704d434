//! Building footprint geometry: polygons, minimum bounding rectangles and
//! inter-building distances. Coordinates are planar meters.

mod geojson;
mod hull;
mod near;

pub use geojson::{
    footprints_from_geojson, footprints_to_geojson, read_footprints, read_regions, regions_from_geojson, write_footprints,
    write_regions, Region,
};
pub use hull::{convex_hull, min_bounding_rect, MinBoundingGeometry};
pub use near::{near_distance, point_segment_distance, segment_distance, NearIndex};

use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

/// Twice the signed area of a ring (positive when counterclockwise).
fn ring_signed_area2(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| ring[i].cross(ring[(i + 1) % n])).sum()
}

fn normalize_ring(mut ring: Vec<Point>, what: &str) -> Result<Vec<Point>> {
    if ring.len() >= 2 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Validation(format!("{what} has non-finite coordinates")));
    }
    let mut distinct: Vec<Point> = Vec::with_capacity(ring.len());
    for p in &ring {
        if !distinct.contains(p) {
            distinct.push(*p);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::Validation(format!("{what} needs at least 3 distinct vertices")));
    }
    if ring_signed_area2(&ring) == 0.0 {
        return Err(Error::Validation(format!("{what} has zero area")));
    }
    Ok(ring)
}

/// Simple polygon with optional holes. Rings are stored open (first != last).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Vec<Point>,
    holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let exterior = normalize_ring(exterior, "exterior ring")?;
        let holes = holes
            .into_iter()
            .map(|h| normalize_ring(h, "hole ring"))
            .collect::<Result<Vec<_>>>()?;
        Ok(Polygon { exterior, holes })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Polygon::new(
            vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)],
            vec![],
        )
    }

    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    /// Exterior ring edges as `(start, end)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.exterior.len();
        (0..n).map(move |i| (self.exterior[i], self.exterior[(i + 1) % n]))
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.exterior {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    pub fn contains(&self, p: Point) -> bool {
        crate::raster::contains_point(self, p)
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Polygon {
        Polygon {
            exterior: self.exterior.iter().map(|&p| f(p)).collect(),
            holes: self.holes.iter().map(|h| h.iter().map(|&p| f(p)).collect()).collect(),
        }
    }
}

/// Shoelace area of the exterior minus the areas of the holes.
pub fn polygon_area(polygon: &Polygon) -> f64 {
    let outer = ring_signed_area2(polygon.exterior()).abs() / 2.0;
    let holes: f64 = polygon.holes().iter().map(|h| ring_signed_area2(h).abs() / 2.0).sum();
    outer - holes
}

fn ring_centroid(ring: &[Point]) -> (f64, Point) {
    let n = ring.len();
    let mut a2 = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let c = p.cross(q);
        a2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    let area = a2 / 2.0;
    (area.abs(), Point::new(cx / (3.0 * a2), cy / (3.0 * a2)))
}

/// Area-weighted centroid, holes subtracted.
pub fn centroid(polygon: &Polygon) -> Point {
    let (a, c) = ring_centroid(polygon.exterior());
    let mut total = a;
    let mut sx = c.x * a;
    let mut sy = c.y * a;
    for h in polygon.holes() {
        let (ha, hc) = ring_centroid(h);
        total -= ha;
        sx -= hc.x * ha;
        sy -= hc.y * ha;
    }
    Point::new(sx / total, sy / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub id: String,
    pub polygon: Polygon,
    pub ref_height_m: Option<f64>,
}

impl Footprint {
    pub fn new(id: impl Into<String>, polygon: Polygon, ref_height_m: Option<f64>) -> Result<Self> {
        let id = id.into();
        if let Some(h) = ref_height_m {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Validation(format!("footprint {id}: reference height must be > 0, got {h}")));
            }
        }
        Ok(Footprint {
            id,
            polygon,
            ref_height_m,
        })
    }
}

/// Footprints with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FootprintSet {
    items: Vec<Footprint>,
}

impl FootprintSet {
    pub fn new(items: Vec<Footprint>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &items {
            if !seen.insert(f.id.as_str()) {
                return Err(Error::Validation(format!("duplicate footprint id {}", f.id)));
            }
        }
        Ok(FootprintSet { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Footprint> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[Footprint] {
        &self.items
    }

    pub fn get(&self, i: usize) -> &Footprint {
        &self.items[i]
    }

    pub fn find(&self, id: &str) -> Option<&Footprint> {
        self.items.iter().find(|f| f.id == id)
    }

    /// Subset keeping only footprints whose index satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(usize, &Footprint) -> bool) -> FootprintSet {
        FootprintSet {
            items: self.items.iter().enumerate().filter(|(i, f)| keep(*i, f)).map(|(_, f)| f.clone()).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a FootprintSet {
    type Item = &'a Footprint;
    type IntoIter = std::slice::Iter<'a, Footprint>;
    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Per-footprint shape attributes used as model features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures {
    pub mbg: Option<MinBoundingGeometry>,
    pub near_m: Option<f64>,
}

/// Minimum bounding rectangle and nearest-neighbour distance of every
/// footprint, in set order. Degenerate hulls and isolated footprints give `None`.
pub fn shape_features(set: &FootprintSet) -> Vec<ShapeFeatures> {
    use rayon::prelude::*;
    let idx = NearIndex::from_footprints(set.as_slice());
    (0..set.len())
        .into_par_iter()
        .map(|i| ShapeFeatures {
            mbg: min_bounding_rect(&set.get(i).polygon).ok(),
            near_m: idx.nearest(i),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GeometryFeature {
    #[serde(rename = "MBG_Width")]
    MbgWidth,
    #[serde(rename = "MBG_Length")]
    MbgLength,
    #[serde(rename = "MBG_Orientation")]
    MbgOrientation,
    #[serde(rename = "Near_Distance")]
    NearDistance,
}

impl GeometryFeature {
    pub const ALL: [GeometryFeature; 4] = [
        GeometryFeature::MbgWidth,
        GeometryFeature::MbgLength,
        GeometryFeature::MbgOrientation,
        GeometryFeature::NearDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeometryFeature::MbgWidth => "MBG_Width",
            GeometryFeature::MbgLength => "MBG_Length",
            GeometryFeature::MbgOrientation => "MBG_Orientation",
            GeometryFeature::NearDistance => "Near_Distance",
        }
    }

    pub fn parse(s: &str) -> Option<GeometryFeature> {
        GeometryFeature::ALL.into_iter().find(|g| g.name() == s)
    }

    pub fn value(self, s: &ShapeFeatures) -> Option<f64> {
        match self {
            GeometryFeature::MbgWidth => s.mbg.map(|m| m.width_m),
            GeometryFeature::MbgLength => s.mbg.map(|m| m.length_m),
            GeometryFeature::MbgOrientation => s.mbg.map(|m| m.orientation_deg),
            GeometryFeature::NearDistance => s.near_m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_and_centroid() {
        let sq = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(polygon_area(&sq), 1.0);
        let c = centroid(&sq);
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);

        let holed = Polygon::new(
            sq.exterior().to_vec(),
            vec![Polygon::rect(0.25, 0.25, 0.75, 0.75).unwrap().exterior().to_vec()],
        )
        .unwrap();
        assert!((polygon_area(&holed) - 0.75).abs() < 1e-12);

        let tri = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 3.0)], vec![]).unwrap();
        assert_eq!(polygon_area(&tri), 6.0);
    }

    #[test]
    fn closed_rings_are_opened() {
        let p = Polygon::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 0.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(p.exterior().len(), 3);
    }

    #[test]
    fn invalid_polygons() {
        assert!(Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)], vec![]).is_err());
        assert!(Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)], vec![]).is_err());
    }

    #[test]
    fn footprint_set_rejects_duplicates() {
        let p = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        let a = Footprint::new("a", p.clone(), None).unwrap();
        assert!(FootprintSet::new(vec![a.clone(), a]).is_err());
        assert!(Footprint::new("b", p, Some(0.0)).is_err());
    }
}
