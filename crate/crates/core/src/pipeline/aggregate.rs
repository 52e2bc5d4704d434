use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, polygon_area, FootprintSet, Region};
use crate::raster::contains_point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub id: String,
    pub count: usize,
    /// Mean over buildings with a height; `None` when there are none.
    pub mean_height_m: Option<f64>,
    pub max_height_m: Option<f64>,
    pub footprint_area_m2: f64,
    pub region_area_m2: f64,
    /// Building footprint area over region area.
    pub built_ratio: f64,
}

/// Per-region building statistics. A building belongs to the region that
/// contains its centroid, so regions that partition space partition buildings.
pub fn aggregate(footprints: &FootprintSet, heights: &[Option<f64>], regions: &[Region]) -> Result<Vec<RegionStats>> {
    if heights.len() != footprints.len() {
        return Err(Error::Shape {
            expected: footprints.len(),
            got: heights.len(),
        });
    }
    let centroids: Vec<_> = footprints.iter().map(|f| centroid(&f.polygon)).collect();
    let areas: Vec<f64> = footprints.iter().map(|f| polygon_area(&f.polygon)).collect();
    Ok(regions
        .iter()
        .map(|r| {
            let members: Vec<usize> = (0..centroids.len()).filter(|&i| contains_point(&r.polygon, centroids[i])).collect();
            let hs: Vec<f64> = members.iter().filter_map(|&i| heights[i]).collect();
            let footprint_area: f64 = members.iter().map(|&i| areas[i]).sum();
            let region_area = polygon_area(&r.polygon);
            RegionStats {
                id: r.id.clone(),
                count: members.len(),
                mean_height_m: (!hs.is_empty()).then(|| hs.iter().sum::<f64>() / hs.len() as f64),
                max_height_m: hs.iter().copied().reduce(f64::max),
                footprint_area_m2: footprint_area,
                region_area_m2: region_area,
                built_ratio: if region_area > 0.0 { footprint_area / region_area } else { 0.0 },
            }
        })
        .collect())
}

pub fn write_region_csv(stats: &[RegionStats], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "count", "mean_height_m", "max_height_m", "footprint_area_m2", "region_area_m2", "built_ratio"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for s in stats {
        w.write_record([
            s.id.clone(),
            s.count.to_string(),
            opt(s.mean_height_m),
            opt(s.max_height_m),
            s.footprint_area_m2.to_string(),
            s.region_area_m2.to_string(),
            s.built_ratio.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Footprint, Polygon};

    fn region(id: &str, x0: f64, x1: f64) -> Region {
        Region {
            id: id.into(),
            polygon: Polygon::rect(x0, 0.0, x1, 100.0).unwrap(),
        }
    }

    #[test]
    fn partition_and_empty_region() {
        let fps = FootprintSet::new(
            (0..6)
                .map(|i| {
                    let x = 5.0 + 15.0 * i as f64;
                    Footprint::new(format!("b{i}"), Polygon::rect(x, 10.0, x + 10.0, 20.0).unwrap(), None).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let h: Vec<Option<f64>> = (0..6).map(|i| Some(10.0 + i as f64)).collect();
        let whole = aggregate(&fps, &h, &[region("all", 0.0, 100.0)]).unwrap();
        assert_eq!(whole[0].count, 6);
        assert_eq!(whole[0].max_height_m, Some(15.0));
        assert!((whole[0].mean_height_m.unwrap() - 12.5).abs() < 1e-12);
        let halves = aggregate(&fps, &h, &[region("w", 0.0, 50.0), region("e", 50.0, 100.0)]).unwrap();
        assert_eq!(halves[0].count + halves[1].count, 6);
        assert!((halves[0].footprint_area_m2 + halves[1].footprint_area_m2 - whole[0].footprint_area_m2).abs() < 1e-9);
        let none = aggregate(&fps, &h, &[region("x", 200.0, 300.0)]).unwrap();
        assert_eq!((none[0].count, none[0].mean_height_m), (0, None));
    }
}
