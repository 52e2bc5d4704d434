//! Boundary-to-boundary nearest-neighbour distance between footprints,
//! accelerated by a uniform grid with exact pruning.

use std::collections::HashMap;

use super::{Footprint, Point, Polygon};
use crate::stats;

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 { 0.0 } else { (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0) };
    let q = Point::new(a.x + t * ab.x, a.y + t * ab.y);
    let d = p.sub(q);
    d.dot(d).sqrt()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Minimum Euclidean distance between segments `ab` and `cd`.
pub fn segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Distance between two exterior boundaries; 0 when they touch or when one
/// polygon lies inside the other.
pub(crate) fn boundary_distance(p: &Polygon, q: &Polygon) -> f64 {
    if p.contains(q.exterior()[0]) || q.contains(p.exterior()[0]) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (a, b) in p.edges() {
        for (c, d) in q.edges() {
            best = best.min(segment_distance(a, b, c, d));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Bbox {
    min: Point,
    max: Point,
}

impl Bbox {
    fn distance(&self, o: &Bbox) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(0.0);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Uniform-grid index over footprint bounding boxes. Cell size is twice the
/// median bounding-box diagonal.
#[derive(Debug)]
pub struct NearIndex<'a> {
    polys: Vec<&'a Polygon>,
    boxes: Vec<Bbox>,
    cell: f64,
    origin: Point,
    cells: HashMap<(i64, i64), Vec<usize>>,
    span: (i64, i64, i64, i64),
}

impl<'a> NearIndex<'a> {
    pub fn new(polys: Vec<&'a Polygon>) -> Self {
        let boxes: Vec<Bbox> = polys
            .iter()
            .map(|p| {
                let (min, max) = p.bounds();
                Bbox { min, max }
            })
            .collect();
        let mut diags: Vec<f64> = boxes.iter().map(|b| b.max.sub(b.min).dot(b.max.sub(b.min)).sqrt()).collect();
        stats::sort_f64(&mut diags);
        let cell = stats::median_sorted(&diags).map(|d| 2.0 * d).filter(|c| *c > 0.0).unwrap_or(1.0);
        let origin = boxes
            .iter()
            .fold(Point::new(f64::INFINITY, f64::INFINITY), |o, b| Point::new(o.x.min(b.min.x), o.y.min(b.min.y)));
        let mut idx = NearIndex {
            polys,
            boxes,
            cell,
            origin,
            cells: HashMap::new(),
            span: (i64::MAX, i64::MIN, i64::MAX, i64::MIN),
        };
        for i in 0..idx.boxes.len() {
            let (cx0, cy0, cx1, cy1) = idx.cell_range(&idx.boxes[i]);
            idx.span = (idx.span.0.min(cx0), idx.span.1.max(cx1), idx.span.2.min(cy0), idx.span.3.max(cy1));
            for cx in cx0..=cx1 {
                for cy in cy0..=cy1 {
                    idx.cells.entry((cx, cy)).or_default().push(i);
                }
            }
        }
        idx
    }

    pub fn from_footprints(fps: &'a [Footprint]) -> Self {
        NearIndex::new(fps.iter().map(|f| &f.polygon).collect())
    }

    fn cell_range(&self, b: &Bbox) -> (i64, i64, i64, i64) {
        let f = |v: f64, o: f64| ((v - o) / self.cell).floor() as i64;
        (f(b.min.x, self.origin.x), f(b.min.y, self.origin.y), f(b.max.x, self.origin.x), f(b.max.y, self.origin.y))
    }

    /// Distance from the polygon at `target` to its nearest other polygon,
    /// `None` when there is no other polygon.
    pub fn nearest(&self, target: usize) -> Option<f64> {
        self.nearest_to(self.polys[target], Some(target))
    }

    /// Distance from an arbitrary polygon to the nearest indexed polygon,
    /// skipping `exclude`.
    pub fn nearest_to(&self, poly: &Polygon, exclude: Option<usize>) -> Option<f64> {
        let (min, max) = poly.bounds();
        let tb = Bbox { min, max };
        let (cx0, cy0, cx1, cy1) = self.cell_range(&tb);
        let mut seen = vec![false; self.polys.len()];
        if let Some(e) = exclude {
            seen[e] = true;
        }
        let mut best = f64::INFINITY;
        let mut found = false;
        let mut ring = 0i64;
        loop {
            let (x0, x1, y0, y1) = (cx0 - ring, cx1 + ring, cy0 - ring, cy1 + ring);
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    if ring > 0 && cx != x0 && cx != x1 && cy != y0 && cy != y1 {
                        continue;
                    }
                    let Some(list) = self.cells.get(&(cx, cy)) else { continue };
                    for &j in list {
                        if seen[j] {
                            continue;
                        }
                        seen[j] = true;
                        found = true;
                        if tb.distance(&self.boxes[j]) > best {
                            continue;
                        }
                        best = best.min(boundary_distance(poly, self.polys[j]));
                    }
                }
            }
            // Anything not yet seen lies at least `ring` whole cells away.
            if found && best <= ring as f64 * self.cell {
                break;
            }
            let covers = x0 <= self.span.0 && x1 >= self.span.1 && y0 <= self.span.2 && y1 >= self.span.3;
            if covers {
                break;
            }
            ring += 1;
        }
        found.then_some(best)
    }

    pub fn all_nearest(&self) -> Vec<Option<f64>> {
        (0..self.polys.len()).map(|i| self.nearest(i)).collect()
    }
}

/// Distance from `target` to the nearest footprint in `others` (a footprint
/// with the same id as the target is skipped). `None` means no neighbour.
pub fn near_distance(target: &Footprint, others: &[Footprint]) -> Option<f64> {
    let rest: Vec<&Polygon> = others.iter().filter(|f| f.id != target.id).map(|f| &f.polygon).collect();
    if rest.is_empty() {
        return None;
    }
    NearIndex::new(rest).nearest_to(&target.polygon, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(id: &str, x0: f64, y0: f64, s: f64) -> Footprint {
        Footprint::new(id, Polygon::rect(x0, y0, x0 + s, y0 + s).unwrap(), None).unwrap()
    }

    #[test]
    fn facing_squares() {
        let a = sq("a", 0.0, 0.0, 1.0);
        let b = sq("b", 3.0, 0.0, 1.0);
        assert_eq!(near_distance(&a, &[a.clone(), b]), Some(2.0));
    }

    #[test]
    fn touching_and_nested() {
        let a = sq("a", 0.0, 0.0, 1.0);
        let b = sq("b", 1.0, 0.0, 1.0);
        assert_eq!(near_distance(&a, &[b]), Some(0.0));
        let big = sq("big", -5.0, -5.0, 20.0);
        assert_eq!(near_distance(&a, &[big]), Some(0.0));
    }

    #[test]
    fn no_neighbour_is_none() {
        let a = sq("a", 0.0, 0.0, 1.0);
        assert_eq!(near_distance(&a, &[a.clone()]), None);
        assert_eq!(near_distance(&a, &[]), None);
    }

    #[test]
    fn far_outlier_found() {
        let mut fps: Vec<Footprint> = (0..20).map(|i| sq(&format!("c{i}"), i as f64 * 3.0, 0.0, 1.0)).collect();
        fps.push(sq("far", 1000.0, 1000.0, 1.0));
        let idx = NearIndex::from_footprints(&fps);
        let d = idx.nearest(20).unwrap();
        let brute = fps[..20].iter().map(|f| boundary_distance(&fps[20].polygon, &f.polygon)).fold(f64::INFINITY, f64::min);
        assert_eq!(d, brute);
    }

    #[test]
    fn segment_distance_cases() {
        let p = |x, y| Point::new(x, y);
        assert_eq!(segment_distance(p(0.0, 0.0), p(2.0, 2.0), p(0.0, 2.0), p(2.0, 0.0)), 0.0);
        assert_eq!(segment_distance(p(0.0, 0.0), p(1.0, 0.0), p(0.0, 2.0), p(1.0, 2.0)), 2.0);
        assert_eq!(point_segment_distance(p(5.0, 0.0), p(0.0, 0.0), p(1.0, 0.0)), 4.0);
    }
}
