//! Map file loading and the enrichment steps run on ingest: POI to AOI
//! matching and AOI to road connection points.

use std::io::Read;

use tracing::warn;

use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::model::{Aoi, Connection, MapBundle, Poi, PoiId, Road};
use crate::validate::{validate_map, POI_AOI_TOLERANCE};

/// Roads closer than this to an AOI boundary get a connection point.
pub const CONNECTION_TOLERANCE: f64 = 30.0;

/// POI dropped during matching because no AOI is close enough.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedPoi {
    pub id: PoiId,
    pub reason: String,
}

/// Parses a map document, fills derived fields that are absent (AOI area,
/// connections, POI AOI ids) and validates the result.
pub fn load_map<R: Read>(mut source: R) -> Result<MapBundle> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::Parse(format!("malformed map document: {e}")))?;
    if text.trim().is_empty() {
        return Err(Error::Parse("malformed map document: empty".into()));
    }
    let mut bundle: MapBundle =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("malformed map document: {e}")))?;
    enrich(&mut bundle);
    let report = validate_map(&bundle);
    if report.has_errors() {
        return Err(Error::Schema(report));
    }
    for issue in &report.issues {
        warn!("{issue}");
    }
    Ok(bundle)
}

pub fn load_map_file(path: impl AsRef<std::path::Path>) -> Result<MapBundle> {
    let file = std::fs::File::open(path)?;
    load_map(std::io::BufReader::new(file))
}

pub fn save_map(bundle: &MapBundle) -> String {
    serde_json::to_string_pretty(bundle).expect("map bundle serializes")
}

/// Fills every derived field that the document left out.
pub fn enrich(bundle: &mut MapBundle) {
    for aoi in &mut bundle.aois {
        if aoi.area.is_none() && aoi.boundary.defect().is_none() {
            aoi.area = Some(aoi.boundary.area());
        }
    }
    let index = SpatialIndex::build(bundle);
    for i in 0..bundle.aois.len() {
        if bundle.aois[i].connections.is_none() && bundle.aois[i].boundary.defect().is_none() {
            let conns = compute_aoi_connections(&bundle.aois[i], &bundle.roads, &index);
            bundle.aois[i].connections = Some(conns);
        }
    }
    let (missing, mut keep): (Vec<Poi>, Vec<Poi>) =
        std::mem::take(&mut bundle.pois).into_iter().partition(|p| p.aoi_id.is_none());
    let (matched, dropped) = match_pois_to_aois(missing, &index);
    for d in dropped {
        warn!("dropping poi {}: {}", d.id, d.reason);
    }
    keep.extend(matched);
    keep.sort_by_key(|p| p.id);
    bundle.pois = keep;
}

/// Assigns each POI to the AOI that contains it, falling back to the
/// nearest AOI within 5 m. POIs with neither are returned as dropped.
pub fn match_pois_to_aois(pois: Vec<Poi>, index: &SpatialIndex) -> (Vec<Poi>, Vec<DroppedPoi>) {
    let mut kept = Vec::with_capacity(pois.len());
    let mut dropped = Vec::new();
    for mut poi in pois {
        let found = index
            .containing_aoi(&poi.coordinate)
            .or_else(|| index.nearest_aoi_within(&poi.coordinate, POI_AOI_TOLERANCE).map(|(id, _)| id));
        match found {
            Some(aoi) => {
                poi.aoi_id = Some(aoi);
                kept.push(poi);
            }
            None => dropped.push(DroppedPoi {
                id: poi.id,
                reason: format!("no AOI within {POI_AOI_TOLERANCE} m"),
            }),
        }
    }
    (kept, dropped)
}

/// One connection per road within 30 m of the AOI boundary, placed at the
/// point of that road closest to the AOI centroid.
pub fn compute_aoi_connections(aoi: &Aoi, roads: &[Road], index: &SpatialIndex) -> Vec<Connection> {
    let centroid = aoi.boundary.centroid();
    index
        .roads_near_polygon(&aoi.boundary, CONNECTION_TOLERANCE)
        .into_iter()
        .filter_map(|id| roads.iter().find(|r| r.id == id))
        .map(|road| Connection {
            road_id: road.id,
            point: road.geometry.project(&centroid).point,
            walk_allowed: road.walkable,
            drive_allowed: road.drivable,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Polygon, Polyline};
    use crate::model::{AoiId, Category, LandUse, RoadId};
    use serde_json::Map;

    fn road(id: u64, a: (f64, f64), b: (f64, f64)) -> Road {
        Road {
            id: RoadId(id),
            geometry: Polyline::new(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]),
            lane_count: 2,
            speed_limit: 12.0,
            walkable: true,
            drivable: false,
            extra: Map::new(),
        }
    }

    fn square(id: u64, x0: f64, y0: f64, side: f64, population: u64) -> Aoi {
        Aoi {
            id: AoiId(id),
            boundary: Polygon::rect(Point::new(x0, y0), Point::new(x0 + side, y0 + side)),
            land_use: LandUse::Residential,
            population,
            connections: None,
            enterprises: vec![],
            consumption: Default::default(),
            rent: 0,
            area: None,
            extra: Map::new(),
        }
    }

    #[test]
    fn empty_document_is_parse_error() {
        assert!(matches!(load_map("".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(load_map("  \n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(load_map("{\"roads\": 3}".as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn abutting_road_gets_perpendicular_foot() {
        // AOI spans x in [20, 60], y in [10, 50]; road runs along y = 0
        let roads = vec![road(1, (0.0, 0.0), (100.0, 0.0))];
        let aoi = square(1, 20.0, 10.0, 40.0, 10);
        let bundle = MapBundle {
            roads: roads.clone(),
            aois: vec![aoi.clone()],
            ..Default::default()
        };
        let idx = SpatialIndex::build(&bundle);
        let conns = compute_aoi_connections(&aoi, &roads, &idx);
        assert_eq!(conns.len(), 1);
        // foot of the perpendicular from the centroid (40, 30)
        assert_eq!(conns[0].point, Point::new(40.0, 0.0));
        assert!(conns[0].walk_allowed);
        assert!(!conns[0].drive_allowed);
    }

    #[test]
    fn remote_aoi_connections() {
        let roads = vec![road(1, (0.0, 0.0), (100.0, 0.0))];
        let bundle = MapBundle {
            roads: roads.clone(),
            aois: vec![square(1, 0.0, 1000.0, 50.0, 0), square(2, 0.0, 2000.0, 50.0, 500)],
            ..Default::default()
        };
        let idx = SpatialIndex::build(&bundle);
        assert!(compute_aoi_connections(&bundle.aois[0], &roads, &idx).is_empty());
        let json = save_map(&bundle);
        match load_map(json.as_bytes()) {
            Err(Error::Schema(report)) => {
                assert!(report.errors().any(|i| i.code == "ISOLATED_AOI" && i.subject_id == 2));
                assert!(!report.errors().any(|i| i.subject_id == 1));
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn poi_matching() {
        let bundle = MapBundle {
            aois: vec![square(7, 0.0, 0.0, 100.0, 0), square(8, 200.0, 0.0, 100.0, 0)],
            ..Default::default()
        };
        let idx = SpatialIndex::build(&bundle);
        let poi = |id, x, y| Poi {
            id: PoiId(id),
            coordinate: Point::new(x, y),
            name: format!("p{id}"),
            category: Category("a.b.c".into()),
            aoi_id: None,
            brand: None,
            extra: Map::new(),
        };
        let (kept, dropped) = match_pois_to_aois(
            vec![poi(1, 50.0, 50.0), poi(2, 150.0, 500.0), poi(3, 103.0, 50.0)],
            &idx,
        );
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].aoi_id, Some(AoiId(7)));
        assert_eq!(kept[1].aoi_id, Some(AoiId(7)));
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].id, PoiId(2));
    }
}
