//! R-tree backed spatial queries over AOI polygons and road polylines.
//!
//! The trees only narrow the candidate set; every answer is decided by the
//! exact geometry in [`crate::geometry`], so results match linear scans.

use rstar::primitives::{GeomWithData, Line, Rectangle};
use rstar::{RTree, AABB};

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, point_segment_distance, project_on_segment, Point, Polygon, Polyline};
use crate::model::{AoiId, MapBundle, RoadId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadFilter {
    Any,
    Walkable,
    Drivable,
}

impl RoadFilter {
    fn accepts(&self, walkable: bool, drivable: bool) -> bool {
        match self {
            RoadFilter::Any => true,
            RoadFilter::Walkable => walkable,
            RoadFilter::Drivable => drivable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestRoad {
    pub road_id: RoadId,
    pub point: Point,
    pub distance: f64,
}

#[derive(Debug, Clone)]
struct IndexedAoi {
    id: AoiId,
    boundary: Polygon,
}

#[derive(Debug, Clone)]
struct IndexedRoad {
    id: RoadId,
    geometry: Polyline,
    walkable: bool,
    drivable: bool,
}

type AoiEntry = GeomWithData<Rectangle<[f64; 2]>, usize>;
type SegmentEntry = GeomWithData<Line<[f64; 2]>, usize>;

pub struct SpatialIndex {
    aois: Vec<IndexedAoi>,
    roads: Vec<IndexedRoad>,
    aoi_tree: RTree<AoiEntry>,
    segment_tree: RTree<SegmentEntry>,
}

impl std::fmt::Debug for SpatialIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpatialIndex")
            .field("aois", &self.aois.len())
            .field("roads", &self.roads.len())
            .finish()
    }
}

fn arr(p: &Point) -> [f64; 2] {
    [p.x, p.y]
}

impl SpatialIndex {
    pub fn build(bundle: &MapBundle) -> Self {
        let aois: Vec<IndexedAoi> = bundle
            .aois
            .iter()
            .filter(|a| a.boundary.ring.len() >= 3)
            .map(|a| IndexedAoi {
                id: a.id,
                boundary: a.boundary.clone(),
            })
            .collect();
        let roads: Vec<IndexedRoad> = bundle
            .roads
            .iter()
            .filter(|r| r.geometry.points.len() >= 2)
            .map(|r| IndexedRoad {
                id: r.id,
                geometry: r.geometry.clone(),
                walkable: r.walkable,
                drivable: r.drivable,
            })
            .collect();

        let aoi_tree = RTree::bulk_load(
            aois.iter()
                .enumerate()
                .map(|(i, a)| {
                    let bb = a.boundary.bbox();
                    GeomWithData::new(Rectangle::from_corners(arr(&bb.min), arr(&bb.max)), i)
                })
                .collect(),
        );
        let segment_tree = RTree::bulk_load(
            roads
                .iter()
                .enumerate()
                .flat_map(|(i, r)| {
                    r.geometry
                        .segments()
                        .map(move |(a, b)| GeomWithData::new(Line::new(arr(a), arr(b)), i))
                })
                .collect(),
        );
        Self {
            aois,
            roads,
            aoi_tree,
            segment_tree,
        }
    }

    /// AOI containing `p` (boundary inclusive); the smallest id wins on overlap.
    pub fn containing_aoi(&self, p: &Point) -> Option<AoiId> {
        self.aoi_tree
            .locate_in_envelope_intersecting(&AABB::from_point(arr(p)))
            .map(|e| &self.aois[e.data])
            .filter(|a| point_in_polygon(p, &a.boundary))
            .map(|a| a.id)
            .min()
    }

    /// Nearest AOI boundary within `max_distance`, ties by smallest id.
    pub fn nearest_aoi_within(&self, p: &Point, max_distance: f64) -> Option<(AoiId, f64)> {
        let env = AABB::from_corners(
            [p.x - max_distance, p.y - max_distance],
            [p.x + max_distance, p.y + max_distance],
        );
        self.aoi_tree
            .locate_in_envelope_intersecting(&env)
            .map(|e| &self.aois[e.data])
            .map(|a| {
                let d = if point_in_polygon(p, &a.boundary) {
                    0.0
                } else {
                    a.boundary.boundary_distance(p)
                };
                (a.id, d)
            })
            .filter(|(_, d)| *d <= max_distance)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    /// Closest point on any road passing `filter`; ties go to the lowest road id.
    pub fn nearest_road(&self, p: &Point, filter: RoadFilter) -> Result<NearestRoad> {
        let mut best: Option<NearestRoad> = None;
        for (entry, d2) in self.segment_tree.nearest_neighbor_iter_with_distance_2(&arr(p)) {
            if let Some(b) = &best {
                // the tree yields segments in ascending distance; allow for rounding
                let bound = b.distance * (1.0 + 1e-9) + 1e-9;
                if d2 > bound * bound {
                    break;
                }
            }
            let road = &self.roads[entry.data];
            if !filter.accepts(road.walkable, road.drivable) {
                continue;
            }
            let [ax, ay] = entry.geom().from;
            let [bx, by] = entry.geom().to;
            let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
            let distance = point_segment_distance(p, &a, &b);
            let better = match &best {
                None => true,
                Some(cur) => {
                    distance < cur.distance || (distance == cur.distance && road.id < cur.road_id)
                }
            };
            if better {
                let (point, _) = project_on_segment(p, &a, &b);
                best = Some(NearestRoad {
                    road_id: road.id,
                    point,
                    distance,
                });
            }
        }
        best.ok_or(Error::NoRoad)
    }

    /// Roads whose geometry comes within `max_distance` of the polygon, ascending by id.
    pub fn roads_near_polygon(&self, poly: &Polygon, max_distance: f64) -> Vec<RoadId> {
        let bb = poly.bbox().expand(max_distance);
        let env = AABB::from_corners(arr(&bb.min), arr(&bb.max));
        let mut candidates: Vec<usize> = self
            .segment_tree
            .locate_in_envelope_intersecting(&env)
            .map(|e| e.data)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let mut out: Vec<RoadId> = candidates
            .into_iter()
            .map(|i| &self.roads[i])
            .filter(|r| {
                point_in_polygon(&r.geometry.first(), poly)
                    || poly.boundary_distance_to_polyline(&r.geometry) <= max_distance
            })
            .map(|r| r.id)
            .collect();
        out.sort();
        out
    }

    /// AOIs whose bounding boxes intersect the given box.
    pub fn aois_in_box(&self, min: Point, max: Point) -> Vec<AoiId> {
        let env = AABB::from_corners(arr(&min), arr(&max));
        let mut ids: Vec<AoiId> = self
            .aoi_tree
            .locate_in_envelope_intersecting(&env)
            .map(|e| self.aois[e.data].id)
            .collect();
        ids.sort();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Road, Aoi, LandUse};
    use serde_json::Map;

    fn road(id: u64, a: (f64, f64), b: (f64, f64), drivable: bool) -> Road {
        Road {
            id: RoadId(id),
            geometry: Polyline::new(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]),
            lane_count: 1,
            speed_limit: 10.0,
            walkable: true,
            drivable,
            extra: Map::new(),
        }
    }

    fn aoi(id: u64, min: (f64, f64), max: (f64, f64)) -> Aoi {
        Aoi {
            id: AoiId(id),
            boundary: Polygon::rect(Point::new(min.0, min.1), Point::new(max.0, max.1)),
            land_use: LandUse::Other,
            population: 0,
            connections: None,
            enterprises: vec![],
            consumption: Default::default(),
            rent: 0,
            area: None,
            extra: Map::new(),
        }
    }

    #[test]
    fn point_beside_single_road() {
        let bundle = MapBundle {
            roads: vec![road(3, (0.0, 0.0), (100.0, 0.0), true)],
            ..Default::default()
        };
        let idx = SpatialIndex::build(&bundle);
        let n = idx.nearest_road(&Point::new(50.0, 1.0), RoadFilter::Any).unwrap();
        assert_eq!(n.road_id, RoadId(3));
        assert_eq!(n.distance, 1.0);
        assert_eq!(n.point, Point::new(50.0, 0.0));
    }

    #[test]
    fn no_drivable_road() {
        let bundle = MapBundle {
            roads: vec![road(3, (0.0, 0.0), (100.0, 0.0), false)],
            ..Default::default()
        };
        let idx = SpatialIndex::build(&bundle);
        assert!(matches!(
            idx.nearest_road(&Point::new(5.0, 5.0), RoadFilter::Drivable),
            Err(Error::NoRoad)
        ));
    }

    #[test]
    fn tie_goes_to_lowest_id() {
        let bundle = MapBundle {
            roads: vec![
                road(9, (0.0, 0.0), (10.0, 0.0), true),
                road(4, (10.0, 0.0), (20.0, 0.0), true),
            ],
            ..Default::default()
        };
        let idx = SpatialIndex::build(&bundle);
        let n = idx.nearest_road(&Point::new(10.0, 3.0), RoadFilter::Any).unwrap();
        assert_eq!(n.road_id, RoadId(4));
    }

    #[test]
    fn containment_prefers_smallest_id_on_shared_border() {
        let bundle = MapBundle {
            aois: vec![aoi(8, (0.0, 0.0), (10.0, 10.0)), aoi(5, (10.0, 0.0), (20.0, 10.0))],
            ..Default::default()
        };
        let idx = SpatialIndex::build(&bundle);
        assert_eq!(idx.containing_aoi(&Point::new(10.0, 5.0)), Some(AoiId(5)));
        assert_eq!(idx.containing_aoi(&Point::new(5.0, 5.0)), Some(AoiId(8)));
        assert_eq!(idx.containing_aoi(&Point::new(50.0, 5.0)), None);
        assert_eq!(idx.nearest_aoi_within(&Point::new(23.0, 5.0), 5.0), Some((AoiId(5), 3.0)));
        assert_eq!(idx.nearest_aoi_within(&Point::new(26.0, 5.0), 5.0), None);
    }
}
