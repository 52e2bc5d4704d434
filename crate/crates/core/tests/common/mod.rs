//! Brute-force reference implementations shared by the oracle and
//! acceptance suites. Each one is written from the definition, not from the
//! library code, and trades speed for obviousness.
#![allow(dead_code)]

use bheight::geometry::{Footprint, FootprintSet, Point, Polygon};
use bheight::models::{Node, Tree};
use bheight::raster::{GridGeometry, MaskGrid, RasterGrid};
use bheight::sampling::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Median by full sort; mean of the two middle values for even counts.
pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Linear-interpolation percentile at rank `(n-1) p / 100`.
pub fn percentile(mut v: Vec<f64>, p: f64) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    if lo + 1 >= v.len() {
        return v[lo];
    }
    v[lo] + (h - lo as f64) * (v[lo + 1] - v[lo])
}

pub fn random_grid(rows: usize, cols: usize, nodata_frac: f64, seed: u64) -> RasterGrid {
    let mut r = rng(seed);
    let g = GridGeometry::new(rows, cols, 100.0, 900.0, 10.0).unwrap();
    let vals = (0..rows * cols)
        .map(|_| if r.gen::<f64>() < nodata_frac { -9999.0 } else { r.gen_range(-50.0f32..50.0) })
        .collect();
    RasterGrid::new(g, -9999.0, vals).unwrap()
}

/// Per-pixel median over the clipped `(2r+1)^2` window, `r = floor(w/ps/2)`.
pub fn window_median_brute(grid: &RasterGrid, window_m: f64) -> Vec<Option<f64>> {
    let g = *grid.geometry();
    let r = ((window_m / g.pixel_size) / 2.0).floor() as i64;
    let mut out = Vec::with_capacity(g.len());
    for row in 0..g.rows as i64 {
        for col in 0..g.cols as i64 {
            let mut vals = Vec::new();
            for rr in row - r..=row + r {
                for cc in col - r..=col + r {
                    if rr >= 0 && cc >= 0 && rr < g.rows as i64 && cc < g.cols as i64 {
                        if let Some(v) = grid.valid_at(rr as usize * g.cols + cc as usize) {
                            vals.push(v);
                        }
                    }
                }
            }
            out.push(median(vals).map(|m| m as f32 as f64));
        }
    }
    out
}

/// Crossing-number point-in-polygon over all rings, half-open: a vertex at
/// the test height counts as above it and a crossing exactly at the point
/// does not count.
pub fn point_in_polygon(poly: &Polygon, x: f64, y: f64) -> bool {
    let mut inside = false;
    for ring in poly.rings() {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            if (a.y >= y) != (b.y >= y) && x < a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y) {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn rasterize_brute(poly: &Polygon, g: &GridGeometry) -> Vec<bool> {
    (0..g.len())
        .map(|i| {
            let (x, y) = g.center(i / g.cols, i % g.cols);
            point_in_polygon(poly, x, y)
        })
        .collect()
}

/// Every output pixel against every set input pixel.
pub fn buffer_brute(mask: &MaskGrid, d: f64) -> Vec<bool> {
    let g = *mask.geometry();
    let set: Vec<(f64, f64)> = (0..g.len()).filter(|&i| mask.bits()[i]).map(|i| g.center(i / g.cols, i % g.cols)).collect();
    (0..g.len())
        .map(|i| {
            let (x, y) = g.center(i / g.cols, i % g.cols);
            set.iter().any(|&(sx, sy)| (x - sx).powi(2) + (y - sy).powi(2) <= d * d)
        })
        .collect()
}

/// Random convex polygon: hull of random points around a center.
pub fn random_convex(r: &mut ChaCha8Rng, cx: f64, cy: f64, radius: f64) -> Polygon {
    loop {
        let n = r.gen_range(3..12);
        let mut pts: Vec<Point> = (0..n)
            .map(|_| {
                let a = r.gen_range(0.0..std::f64::consts::TAU);
                let d = radius * r.gen_range(0.2..1.0);
                Point::new(cx + d * a.cos(), cy + d * a.sin())
            })
            .collect();
        pts.sort_by(|a, b| (a.y - cy).atan2(a.x - cx).partial_cmp(&(b.y - cy).atan2(b.x - cx)).unwrap());
        if let Ok(hull) = bheight::geometry::convex_hull(&pts) {
            if let Ok(p) = Polygon::new(hull, vec![]) {
                return p;
            }
        }
    }
}

fn seg_point(p: Point, a: Point, b: Point) -> f64 {
    let (abx, aby) = (b.x - a.x, b.y - a.y);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0) };
    let (dx, dy) = (p.x - (a.x + t * abx), p.y - (a.y + t * aby));
    (dx * dx + dy * dy).sqrt()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn proper_or_touching(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (d1, d2, d3, d4) = (cross(c, d, a), cross(c, d, b), cross(a, b, c), cross(a, b, d));
    let within = |p: Point, q: Point, r: Point| r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y);
    (d1 * d2 < 0.0 && d3 * d4 < 0.0)
        || (d1 == 0.0 && within(c, d, a))
        || (d2 == 0.0 && within(c, d, b))
        || (d3 == 0.0 && within(a, b, c))
        || (d4 == 0.0 && within(a, b, d))
}

pub fn segment_distance_brute(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if proper_or_touching(a, b, c, d) {
        return 0.0;
    }
    seg_point(a, c, d).min(seg_point(b, c, d)).min(seg_point(c, a, b)).min(seg_point(d, a, b))
}

/// All-pairs, all-edges nearest boundary distance.
pub fn near_brute(set: &FootprintSet) -> Vec<Option<f64>> {
    let edges = |p: &Polygon| {
        let r = p.exterior();
        (0..r.len()).map(|i| (r[i], r[(i + 1) % r.len()])).collect::<Vec<_>>()
    };
    let all: Vec<Vec<(Point, Point)>> = set.iter().map(|f| edges(&f.polygon)).collect();
    (0..all.len())
        .map(|i| {
            let mut best: Option<f64> = None;
            for j in 0..all.len() {
                if i == j {
                    continue;
                }
                for &(a, b) in &all[i] {
                    for &(c, d) in &all[j] {
                        let v = segment_distance_brute(a, b, c, d);
                        best = Some(best.map_or(v, |x: f64| x.min(v)));
                    }
                }
            }
            best
        })
        .collect()
}

/// Equal-size squares at random positions and rotations.
pub fn random_squares(n: usize, side: f64, extent: f64, seed: u64) -> FootprintSet {
    let mut r = rng(seed);
    let items = (0..n)
        .map(|k| {
            let (cx, cy) = (r.gen_range(0.0..extent), r.gen_range(0.0..extent));
            let th: f64 = r.gen_range(0.0..std::f64::consts::PI);
            let h = side / 2.0;
            let ring = [(-h, -h), (h, -h), (h, h), (-h, h)]
                .iter()
                .map(|&(dx, dy)| Point::new(cx + dx * th.cos() - dy * th.sin(), cy + dx * th.sin() + dy * th.cos()))
                .collect();
            Footprint::new(format!("s{k}"), Polygon::new(ring, vec![]).unwrap(), None).unwrap()
        })
        .collect();
    FootprintSet::new(items).unwrap()
}

/// Sum-of-squares reduction `SSE(parent) - SSE(L) - SSE(R)`, two-pass.
fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Best split over every feature and every gap between distinct sorted
/// values; returns `(feature, left rows, gain)`. Gains within `1e-12` of the
/// parent's sum of squares count as tied and resolve to the lower feature,
/// then the lower threshold.
pub fn exhaustive_split(ds: &Dataset, rows: &[usize], min_leaf: usize) -> Option<(usize, Vec<usize>, f64)> {
    let y: Vec<f64> = rows.iter().map(|&i| ds.y[i]).collect();
    let parent = sse(&y);
    let tol = 1e-12 * parent;
    let mut best: Option<(usize, Vec<usize>, f64)> = None;
    for j in 0..ds.n_features() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| ds.get(i, j)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let left: Vec<usize> = rows.iter().copied().filter(|&i| ds.get(i, j) <= w[0]).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&i| ds.get(i, j) > w[0]).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let yl: Vec<f64> = left.iter().map(|&i| ds.y[i]).collect();
            let yr: Vec<f64> = right.iter().map(|&i| ds.y[i]).collect();
            let gain = parent - sse(&yl) - sse(&yr);
            if gain > best.as_ref().map_or(0.0, |b| b.2) + tol {
                best = Some((j, left, gain));
            }
        }
    }
    best
}

/// Walks a fitted tree with its training rows and checks every internal
/// node against [`exhaustive_split`]. Returns the number of nodes checked.
pub fn check_tree_against_oracle(tree: &Tree, ds: &Dataset, min_leaf: usize) -> Result<usize, String> {
    fn walk(nodes: &[Node], k: usize, rows: Vec<usize>, ds: &Dataset, min_leaf: usize, checked: &mut usize) -> Result<(), String> {
        let node = &nodes[k];
        let oracle = exhaustive_split(ds, &rows, min_leaf);
        match (node.feature, oracle) {
            (None, None) => Ok(()),
            (None, Some((j, _, g))) => {
                // A leaf may still be forced by a depth limit; only a constant target justifies it here.
                Err(format!("node {k}: leaf but oracle splits feature {j} with gain {g}"))
            }
            (Some(f), None) => Err(format!("node {k}: split on {f} but oracle finds no positive gain")),
            (Some(f), Some((j, left, _))) => {
                let lib_left: Vec<usize> = rows.iter().copied().filter(|&i| ds.get(i, f) <= node.threshold).collect();
                if f != j || lib_left != left {
                    return Err(format!(
                        "node {k} ({} rows): library splits feature {f} at {}, oracle feature {j} with gain {:e}",
                        rows.len(),
                        node.threshold,
                        exhaustive_split(ds, &rows, min_leaf).unwrap().2
                    ));
                }
                *checked += 1;
                let right: Vec<usize> = rows.iter().copied().filter(|&i| ds.get(i, f) > node.threshold).collect();
                walk(nodes, node.left as usize, left, ds, min_leaf, checked)?;
                walk(nodes, node.right as usize, right, ds, min_leaf, checked)
            }
        }
    }
    let mut checked = 0;
    walk(&tree.nodes, 0, (0..ds.n_rows()).collect(), ds, min_leaf, &mut checked)?;
    Ok(checked)
}

/// `y = x0^2 + sin(3 x1) + 0.5 x2 x3 + noise` with extra pure-noise columns.
pub fn nonlinear_dataset(n: usize, p: usize, noise: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|x| x[0] * x[0] + (3.0 * x[1]).sin() + 0.5 * x[2] * x[3] + noise * gauss(&mut r))
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}

pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = r.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Area of the smallest rectangle aligned with direction `deg` enclosing `pts`.
pub fn rect_area_at(pts: &[Point], deg: f64) -> f64 {
    let (s, c) = deg.to_radians().sin_cos();
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let u = p.x * c + p.y * s;
        let v = -p.x * s + p.y * c;
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    (u1 - u0) * (v1 - v0)
}

pub fn rotate(poly: &Polygon, deg: f64) -> Polygon {
    let (s, c) = deg.to_radians().sin_cos();
    poly.map(|p| Point::new(p.x * c - p.y * s, p.x * s + p.y * c))
}

/// Smallest absolute difference between two orientations modulo 180 degrees.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}
