use super::{Point, Polygon};
use crate::error::{Error, Result};

/// Width, length and orientation of the minimum-area enclosing rectangle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MinBoundingGeometry {
    pub width_m: f64,
    pub length_m: f64,
    /// Degrees counterclockwise from +x to the long side, in `[0, 180)`.
    pub orientation_deg: f64,
}

impl MinBoundingGeometry {
    pub fn area(&self) -> f64 {
        self.width_m * self.length_m
    }
}

/// Counterclockwise convex hull (Andrew's monotone chain). Collinear points
/// on hull edges are dropped.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!("hull needs 3 distinct points, got {}", pts.len())));
    }
    let turn = |o: Point, a: Point, b: Point| a.sub(o).cross(b.sub(o));
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(Error::Degenerate("all points are collinear".into()));
    }
    Ok(hull)
}

fn normalize_deg(mut deg: f64) -> f64 {
    deg = deg.rem_euclid(180.0);
    if deg >= 180.0 {
        deg -= 180.0;
    }
    deg
}

const AREA_TIE: f64 = 1e-12;

/// Minimum-area bounding rectangle of the exterior ring by rotating calipers
/// over the convex hull. Holes cannot change the enclosing rectangle and are
/// ignored. Area ties go to the smallest orientation.
pub fn min_bounding_rect(polygon: &Polygon) -> Result<MinBoundingGeometry> {
    let hull = convex_hull(polygon.exterior())?;
    let n = hull.len();
    let at = |i: usize| hull[i % n];

    // Caliper indices: far end along the edge, farthest from the edge, near end along the edge.
    let (mut far, mut top, mut near) = (1usize, 1usize, 1usize);
    let mut best: Option<(f64, MinBoundingGeometry)> = None;

    for i in 0..n {
        let a = at(i);
        let e = at(i + 1).sub(a);
        let len = e.dot(e).sqrt();
        let u = Point::new(e.x / len, e.y / len);

        if i == 0 {
            far = 1;
        }
        let mut steps = 0;
        while steps < n && at(far + 1).dot(u) >= at(far).dot(u) {
            far += 1;
            steps += 1;
        }
        if i == 0 {
            top = far;
        }
        steps = 0;
        while steps < n && u.cross(at(top + 1).sub(a)) >= u.cross(at(top).sub(a)) {
            top += 1;
            steps += 1;
        }
        if i == 0 {
            near = top;
        }
        steps = 0;
        while steps < n && at(near + 1).dot(u) <= at(near).dot(u) {
            near += 1;
            steps += 1;
        }

        let along = at(far).dot(u) - at(near).dot(u);
        let across = u.cross(at(top).sub(a));
        let area = along * across;

        let edge_deg = u.y.atan2(u.x).to_degrees();
        let orientation = if (along - across).abs() <= AREA_TIE * along.max(across) {
            normalize_deg(edge_deg).min(normalize_deg(edge_deg + 90.0))
        } else if along > across {
            normalize_deg(edge_deg)
        } else {
            normalize_deg(edge_deg + 90.0)
        };
        let cand = MinBoundingGeometry {
            width_m: along.min(across),
            length_m: along.max(across),
            orientation_deg: orientation,
        };
        let replace = match &best {
            None => true,
            Some((best_area, b)) => {
                let tol = AREA_TIE * best_area.abs();
                area < best_area - tol || ((area - best_area).abs() <= tol && cand.orientation_deg < b.orientation_deg)
            }
        };
        if replace {
            best = Some((area, cand));
        }
    }
    let (_, mbg) = best.ok_or_else(|| Error::Degenerate("empty hull".into()))?;
    if !(mbg.width_m > 0.0) {
        return Err(Error::Degenerate("zero-width bounding rectangle".into()));
    }
    Ok(mbg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_drops_interior_point() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.len(), 4);
        assert!(!h.contains(&Point::new(1.0, 1.0)));
        assert!(!h.contains(&Point::new(1.0, 0.0)));
    }

    #[test]
    fn hull_of_convex_ring_is_a_rotation() {
        let ring = [Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(-1.0, 0.0), Point::new(0.0, -1.0)];
        let h = convex_hull(&ring).unwrap();
        assert_eq!(h.len(), 4);
        for p in &ring {
            assert!(h.contains(p));
        }
    }

    #[test]
    fn collinear_is_degenerate() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(convex_hull(&pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn axis_aligned_rectangle() {
        let p = Polygon::rect(0.0, 0.0, 20.0, 10.0).unwrap();
        let m = min_bounding_rect(&p).unwrap();
        assert!((m.width_m - 10.0).abs() < 1e-12);
        assert!((m.length_m - 20.0).abs() < 1e-12);
        assert!(m.orientation_deg.abs() < 1e-12);
    }

    #[test]
    fn rotated_rectangle() {
        let a = Point::new(4.0, 3.0);
        let b = Point::new(-1.2, 1.6);
        let p = Polygon::new(
            vec![Point::new(0.0, 0.0), a, Point::new(a.x + b.x, a.y + b.y), b],
            vec![],
        )
        .unwrap();
        let m = min_bounding_rect(&p).unwrap();
        assert!((m.width_m - 2.0).abs() < 1e-9);
        assert!((m.length_m - 5.0).abs() < 1e-9);
        assert!((m.orientation_deg - 3f64.atan2(4.0).to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn square_takes_smallest_orientation() {
        let p = Polygon::rect(0.0, 0.0, 5.0, 5.0).unwrap();
        let m = min_bounding_rect(&p).unwrap();
        assert_eq!(m.orientation_deg, 0.0);
    }
}
