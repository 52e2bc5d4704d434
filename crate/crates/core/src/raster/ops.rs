use rayon::prelude::*;

use super::{GridGeometry, MaskGrid, RasterGrid};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::stats;

/// x coordinate where the edge `a -> b` crosses the horizontal line `y = py`,
/// or `None` when the edge does not straddle it under the half-open rule
/// (an endpoint exactly at `py` counts as above the line).
#[inline]
pub(crate) fn edge_crossing(a: Point, b: Point, py: f64) -> Option<f64> {
    if (a.y >= py) != (b.y >= py) {
        Some(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y))
    } else {
        None
    }
}

/// Even-odd point-in-polygon test with the same boundary convention as
/// [`rasterize`]: points on a top or left edge are inside, on a bottom or
/// right edge outside.
pub(crate) fn contains_point(polygon: &Polygon, p: Point) -> bool {
    let mut inside = false;
    for ring in polygon.rings() {
        let n = ring.len();
        for i in 0..n {
            if let Some(x) = edge_crossing(ring[i], ring[(i + 1) % n], p.y) {
                if p.x < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Row-major indices of the pixels whose centers fall inside `polygon`.
pub(crate) fn rasterize_indices(polygon: &Polygon, geom: &GridGeometry) -> Vec<usize> {
    let (min, max) = polygon.bounds();
    let Some((r0, r1)) = geom.row_span(min.y, max.y) else {
        return Vec::new();
    };
    let ps = geom.pixel_size;
    let mut out = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for row in r0..=r1 {
        let py = geom.center_y(row);
        xs.clear();
        for ring in polygon.rings() {
            let n = ring.len();
            for i in 0..n {
                if let Some(x) = edge_crossing(ring[i], ring[(i + 1) % n], py) {
                    xs.push(x);
                }
            }
        }
        if xs.len() < 2 {
            continue;
        }
        xs.sort_unstable_by(f64::total_cmp);
        // A center at px is inside iff an odd number of crossings satisfy x <= px,
        // i.e. px lies in one of [xs[0], xs[1]), [xs[2], xs[3]), ...
        for pair in xs.chunks_exact(2) {
            let (x0, x1) = (pair[0], pair[1]);
            let guess = ((x0 - geom.origin_x) / ps - 0.5).ceil();
            let mut c = if guess <= 0.0 { 0usize } else { guess as usize };
            while c > 0 && geom.center_x(c - 1) >= x0 {
                c -= 1;
            }
            while c < geom.cols && geom.center_x(c) < x0 {
                c += 1;
            }
            while c < geom.cols && geom.center_x(c) < x1 {
                out.push(geom.index(row, c));
                c += 1;
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Pixels whose centers lie inside the polygon (even-odd rule, holes respected).
pub fn rasterize(polygon: &Polygon, geom: &GridGeometry) -> MaskGrid {
    let mut mask = MaskGrid::empty(*geom);
    for i in rasterize_indices(polygon, geom) {
        mask.bits[i] = true;
    }
    mask
}

/// Half-width in pixels of the moving window: `floor((window_m / pixel_size) / 2)`.
pub fn window_radius(window_m: f64, pixel_size: f64) -> Result<usize> {
    if !(window_m.is_finite() && window_m >= pixel_size) {
        return Err(Error::Parameter(format!(
            "window of {window_m} m is smaller than the {pixel_size} m pixel"
        )));
    }
    Ok(((window_m / pixel_size) / 2.0).floor() as usize)
}

/// Moving-window median over valid pixels of a `(2r+1)^2` window clipped to
/// the grid. Windows without valid pixels produce nodata.
pub fn window_median(grid: &RasterGrid, window_m: f64) -> Result<RasterGrid> {
    let g = *grid.geometry();
    let r = window_radius(window_m, g.pixel_size)?;
    let rows: Vec<Vec<Option<f64>>> = (0..g.rows)
        .into_par_iter()
        .map(|row| {
            let mut buf = Vec::with_capacity((2 * r + 1) * (2 * r + 1));
            let r_lo = row.saturating_sub(r);
            let r_hi = (row + r).min(g.rows - 1);
            (0..g.cols)
                .map(|col| {
                    buf.clear();
                    let c_lo = col.saturating_sub(r);
                    let c_hi = (col + r).min(g.cols - 1);
                    for rr in r_lo..=r_hi {
                        let base = rr * g.cols;
                        for cc in c_lo..=c_hi {
                            if let Some(v) = grid.valid_at(base + cc) {
                                buf.push(v);
                            }
                        }
                    }
                    stats::median_in_place(&mut buf)
                })
                .collect()
        })
        .collect();
    Ok(RasterGrid::from_f64(g, grid.nodata(), rows.into_iter().flatten()))
}

/// Pixel offsets `(drow, dcol)` whose centers are within `distance_m`.
fn disk_stencil(distance_m: f64, pixel_size: f64) -> (usize, Vec<(isize, isize)>) {
    let r = (distance_m / pixel_size).floor() as isize;
    let d2 = distance_m * distance_m;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            let dx = dc as f64 * pixel_size;
            let dy = dr as f64 * pixel_size;
            if dx * dx + dy * dy <= d2 {
                out.push((dr, dc));
            }
        }
    }
    (r as usize, out)
}

/// Sorted indices of pixels within `distance_m` (center to center) of any of
/// `indices`. Works on a local window around the input so per-footprint
/// zones stay cheap on large grids.
pub(crate) fn dilate_indices(geom: &GridGeometry, indices: &[usize], distance_m: f64) -> Vec<usize> {
    if indices.is_empty() {
        return Vec::new();
    }
    if distance_m == 0.0 {
        let mut v = indices.to_vec();
        v.sort_unstable();
        v.dedup();
        return v;
    }
    let (r, stencil) = disk_stencil(distance_m, geom.pixel_size);
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (usize::MAX, 0, usize::MAX, 0);
    for &i in indices {
        let (row, col) = (i / geom.cols, i % geom.cols);
        rmin = rmin.min(row);
        rmax = rmax.max(row);
        cmin = cmin.min(col);
        cmax = cmax.max(col);
    }
    let wr0 = rmin.saturating_sub(r);
    let wr1 = (rmax + r).min(geom.rows - 1);
    let wc0 = cmin.saturating_sub(r);
    let wc1 = (cmax + r).min(geom.cols - 1);
    let wcols = wc1 - wc0 + 1;
    let mut local = vec![false; (wr1 - wr0 + 1) * wcols];
    for &i in indices {
        let (row, col) = ((i / geom.cols) as isize, (i % geom.cols) as isize);
        for &(dr, dc) in &stencil {
            let rr = row + dr;
            let cc = col + dc;
            if rr < wr0 as isize || rr > wr1 as isize || cc < wc0 as isize || cc > wc1 as isize {
                continue;
            }
            local[(rr as usize - wr0) * wcols + (cc as usize - wc0)] = true;
        }
    }
    local
        .iter()
        .enumerate()
        .filter_map(|(k, &b)| b.then(|| geom.index(wr0 + k / wcols, wc0 + k % wcols)))
        .collect()
}

/// Raster-space buffer: a pixel is set iff its center is within `distance_m`
/// of the center of any set input pixel.
pub fn buffer_mask(mask: &MaskGrid, distance_m: f64) -> Result<MaskGrid> {
    if !(distance_m >= 0.0) || !distance_m.is_finite() {
        return Err(Error::Parameter(format!("buffer distance must be >= 0, got {distance_m}")));
    }
    if distance_m == 0.0 {
        return Ok(mask.clone());
    }
    let g = *mask.geometry();
    let mut out = MaskGrid::empty(g);
    for i in dilate_indices(&g, &mask.indices(), distance_m) {
        out.bits[i] = true;
    }
    Ok(out)
}

/// Mask of valid pixels whose value lies within the `[lo_pct, hi_pct]`
/// percentile band of all valid pixels.
pub fn percentile_clip_mask(grid: &RasterGrid, lo_pct: f64, hi_pct: f64) -> Result<MaskGrid> {
    if !(0.0..100.0).contains(&lo_pct) || !(lo_pct < hi_pct && hi_pct <= 100.0) {
        return Err(Error::Parameter(format!(
            "percentile bounds must satisfy 0 <= lo < hi <= 100, got {lo_pct}..{hi_pct}"
        )));
    }
    let g = *grid.geometry();
    let mut sorted: Vec<f64> = (0..g.len()).filter_map(|i| grid.valid_at(i)).collect();
    if sorted.is_empty() {
        return Ok(MaskGrid::empty(g));
    }
    stats::sort_f64(&mut sorted);
    let lo = stats::percentile_sorted(&sorted, lo_pct).unwrap();
    let hi = stats::percentile_sorted(&sorted, hi_pct).unwrap();
    let bits = (0..g.len())
        .map(|i| grid.valid_at(i).is_some_and(|v| v >= lo && v <= hi))
        .collect();
    MaskGrid::from_bits(g, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DEFAULT_NODATA;

    fn geom(rows: usize, cols: usize) -> GridGeometry {
        GridGeometry::new(rows, cols, 0.0, rows as f64 * 10.0, 10.0).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(
            vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn square_over_four_centers() {
        let g = geom(4, 4);
        // Centers of pixels (0,0)..(1,1) are at x in {5,15}, y in {35,25}.
        let m = rasterize(&rect(2.0, 22.0, 18.0, 38.0), &g);
        assert_eq!(m.count(), 4);
        assert!(m.get(0, 0) && m.get(0, 1) && m.get(1, 0) && m.get(1, 1));
    }

    #[test]
    fn half_open_boundary() {
        let g = geom(4, 4);
        // Left edge x=5 and top edge y=35 pass through centers: included.
        // Right edge x=15 and bottom edge y=25 pass through centers: excluded.
        let m = rasterize(&rect(5.0, 25.0, 15.0, 35.0), &g);
        assert_eq!(m.indices(), vec![g.index(0, 0)]);
    }

    #[test]
    fn sliver_misses_centers() {
        let g = geom(4, 4);
        let m = rasterize(&rect(6.0, 0.0, 8.0, 40.0), &g);
        assert_eq!(m.count(), 0);
        let m = rasterize(&rect(500.0, 500.0, 600.0, 600.0), &g);
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn hole_is_excluded() {
        let g = geom(5, 5);
        let p = Polygon::new(
            rect(0.0, 0.0, 50.0, 50.0).exterior().to_vec(),
            vec![rect(20.0, 20.0, 30.0, 30.0).exterior().to_vec()],
        )
        .unwrap();
        let m = rasterize(&p, &g);
        assert_eq!(m.count(), 24);
        assert!(!m.get(2, 2));
    }

    #[test]
    fn window_median_examples() {
        let g = geom(5, 5);
        let c = RasterGrid::filled(g, 2.0, DEFAULT_NODATA);
        assert_eq!(window_median(&c, 30.0).unwrap(), c);

        let mut vals = vec![1.0f32; 25];
        vals[12] = 100.0;
        let spike = RasterGrid::new(g, DEFAULT_NODATA, vals).unwrap();
        let out = window_median(&spike, 30.0).unwrap();
        assert!(out.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn window_radius_rule() {
        assert_eq!(window_radius(50.0, 10.0).unwrap(), 2);
        assert_eq!(window_radius(10.0, 10.0).unwrap(), 0);
        assert_eq!(window_radius(30.0, 10.0).unwrap(), 1);
        assert!(window_radius(5.0, 10.0).is_err());
    }

    #[test]
    fn window_median_all_nodata_and_even_counts() {
        let g = geom(1, 2);
        let grid = RasterGrid::new(g, DEFAULT_NODATA, vec![1.0, 4.0]).unwrap();
        let out = window_median(&grid, 30.0).unwrap();
        assert_eq!(out.values(), &[2.5, 2.5]);
        let empty = RasterGrid::filled(g, DEFAULT_NODATA, DEFAULT_NODATA);
        assert_eq!(window_median(&empty, 30.0).unwrap().valid_count(), 0);
    }

    #[test]
    fn buffer_single_pixel_by_one_pixel() {
        let g = geom(5, 5);
        let mut m = MaskGrid::empty(g);
        m.set(2, 2, true);
        let b = buffer_mask(&m, 10.0).unwrap();
        let mut expect = vec![g.index(1, 2), g.index(2, 1), g.index(2, 2), g.index(2, 3), g.index(3, 2)];
        expect.sort();
        assert_eq!(b.indices(), expect);
        assert_eq!(buffer_mask(&m, 0.0).unwrap(), m);
        assert!(buffer_mask(&m, -1.0).is_err());
    }

    #[test]
    fn clip_examples() {
        let g = geom(10, 10);
        let grid = RasterGrid::new(g, DEFAULT_NODATA, (1..=100).map(|v| v as f32).collect()).unwrap();
        let m = percentile_clip_mask(&grid, 1.0, 99.0).unwrap();
        assert_eq!(m.count(), 98);
        assert!(!m.bits()[0] && !m.bits()[99]);
        assert_eq!(percentile_clip_mask(&grid, 0.0, 100.0).unwrap().count(), 100);
        let flat = RasterGrid::filled(g, 3.0, DEFAULT_NODATA);
        assert_eq!(percentile_clip_mask(&flat, 1.0, 99.0).unwrap().count(), 100);
        let none = RasterGrid::filled(g, DEFAULT_NODATA, DEFAULT_NODATA);
        assert_eq!(percentile_clip_mask(&none, 1.0, 99.0).unwrap().count(), 0);
        assert!(percentile_clip_mask(&grid, 50.0, 50.0).is_err());
    }
}
