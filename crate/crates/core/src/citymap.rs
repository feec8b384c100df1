//! Validated map plus the derived lookups the simulator needs: id tables,
//! road lengths, road-end to junction attachment and per-AOI anchors.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::index::SpatialIndex;
use crate::model::{AoiId, Destination, JunctionId, MapBundle, PoiId, RoadId};

/// A position on a road: road index and arc-length offset from its start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub road: usize,
    pub offset: f64,
    pub walk: bool,
    pub drive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadEnd {
    Start,
    End,
}

pub struct CityMap {
    pub bundle: MapBundle,
    pub index: SpatialIndex,
    road_ids: HashMap<RoadId, usize>,
    aoi_ids: HashMap<AoiId, usize>,
    poi_ids: HashMap<PoiId, usize>,
    junction_ids: HashMap<JunctionId, usize>,
    pub road_length: Vec<f64>,
    /// Junction index at each road's start / end, when attached.
    pub road_start: Vec<Option<usize>>,
    pub road_end: Vec<Option<usize>>,
    /// Roads reachable by a vehicle leaving the end of each road, ascending by id.
    pub drive_successors: Vec<Vec<usize>>,
    /// Road ends attached to each junction.
    pub junction_ends: Vec<Vec<(usize, RoadEnd)>>,
    pub aoi_anchors: Vec<Vec<Anchor>>,
    pub aoi_centroid: Vec<Point>,
    pub aoi_poi_count: Vec<usize>,
}

impl std::fmt::Debug for CityMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CityMap")
            .field("roads", &self.bundle.roads.len())
            .field("aois", &self.bundle.aois.len())
            .field("pois", &self.bundle.pois.len())
            .finish()
    }
}

impl CityMap {
    /// Builds the derived tables. The bundle is expected to have passed
    /// validation; missing references are skipped rather than reported.
    pub fn new(bundle: MapBundle) -> Self {
        let index = SpatialIndex::build(&bundle);
        let road_ids: HashMap<_, _> = bundle.roads.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        let aoi_ids: HashMap<_, _> = bundle.aois.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        let poi_ids: HashMap<_, _> = bundle.pois.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        let junction_ids: HashMap<_, _> =
            bundle.junctions.iter().enumerate().map(|(i, j)| (j.id, i)).collect();
        let road_length: Vec<f64> = bundle.roads.iter().map(|r| r.length()).collect();

        let n = bundle.roads.len();
        let mut road_start = vec![None; n];
        let mut road_end = vec![None; n];
        let mut lone = Vec::new();
        for (ji, j) in bundle.junctions.iter().enumerate() {
            let (placed, unresolved) = attach_road_ends(&bundle, &road_ids, j);
            for (ri, end) in placed {
                match end {
                    RoadEnd::Start => road_start[ri] = Some(ji),
                    RoadEnd::End => road_end[ri] = Some(ji),
                }
            }
            lone.extend(unresolved.into_iter().map(|ri| (ji, ri)));
        }
        // a junction holding a single road takes whichever end is still free
        for (ji, ri) in lone {
            if road_start[ri].is_some() && road_end[ri].is_none() {
                road_end[ri] = Some(ji);
            } else if road_start[ri].is_none() {
                road_start[ri] = Some(ji);
            }
        }
        let mut junction_ends = vec![Vec::new(); bundle.junctions.len()];
        for ri in 0..n {
            if let Some(j) = road_start[ri] {
                junction_ends[j].push((ri, RoadEnd::Start));
            }
            if let Some(j) = road_end[ri] {
                junction_ends[j].push((ri, RoadEnd::End));
            }
        }

        let mut drive_successors = vec![Vec::new(); n];
        for j in &bundle.junctions {
            for m in &j.movements {
                let (Some(&from), Some(&to)) = (road_ids.get(&m.from_road), road_ids.get(&m.to_road)) else {
                    continue;
                };
                if bundle.roads[from].drivable && bundle.roads[to].drivable {
                    drive_successors[from].push(to);
                }
            }
        }
        for succ in &mut drive_successors {
            succ.sort_by_key(|&i| bundle.roads[i].id);
            succ.dedup();
        }

        let aoi_anchors = bundle
            .aois
            .iter()
            .map(|a| {
                a.connections()
                    .iter()
                    .filter_map(|c| {
                        let ri = *road_ids.get(&c.road_id)?;
                        let road = &bundle.roads[ri];
                        Some(Anchor {
                            road: ri,
                            offset: road.geometry.project(&c.point).offset,
                            walk: c.walk_allowed && road.walkable,
                            drive: c.drive_allowed && road.drivable,
                        })
                    })
                    .collect()
            })
            .collect();
        let aoi_centroid = bundle.aois.iter().map(|a| a.boundary.centroid()).collect();
        let mut aoi_poi_count = vec![0; bundle.aois.len()];
        for p in &bundle.pois {
            if let Some(&ai) = p.aoi_id.and_then(|a| aoi_ids.get(&a)) {
                aoi_poi_count[ai] += 1;
            }
        }

        Self {
            bundle,
            index,
            road_ids,
            aoi_ids,
            poi_ids,
            junction_ids,
            road_length,
            road_start,
            road_end,
            drive_successors,
            junction_ends,
            aoi_anchors,
            aoi_centroid,
            aoi_poi_count,
        }
    }

    pub fn road_index(&self, id: RoadId) -> Result<usize> {
        self.road_ids
            .get(&id)
            .copied()
            .ok_or(Error::UnknownId { kind: "road", id: id.0 })
    }

    pub fn aoi_index(&self, id: AoiId) -> Result<usize> {
        self.aoi_ids
            .get(&id)
            .copied()
            .ok_or(Error::UnknownId { kind: "AOI", id: id.0 })
    }

    pub fn poi_index(&self, id: PoiId) -> Result<usize> {
        self.poi_ids
            .get(&id)
            .copied()
            .ok_or(Error::UnknownId { kind: "POI", id: id.0 })
    }

    pub fn junction_index(&self, id: JunctionId) -> Option<usize> {
        self.junction_ids.get(&id).copied()
    }

    /// AOI index a destination resolves to (a POI resolves to its AOI).
    pub fn destination_aoi(&self, dest: Destination) -> Result<usize> {
        match dest {
            Destination::Aoi(id) => self.aoi_index(id),
            Destination::Poi(id) => {
                let poi = &self.bundle.pois[self.poi_index(id)?];
                let aoi = poi.aoi_id.ok_or(Error::UnknownId { kind: "POI", id: id.0 })?;
                self.aoi_index(aoi)
            }
        }
    }

    pub fn destination_exists(&self, dest: Destination) -> bool {
        match dest {
            Destination::Aoi(id) => self.aoi_ids.contains_key(&id),
            Destination::Poi(id) => self.poi_ids.contains_key(&id),
        }
    }

    pub fn road_end_point(&self, road: usize, end: RoadEnd) -> Point {
        let g = &self.bundle.roads[road].geometry;
        match end {
            RoadEnd::Start => g.first(),
            RoadEnd::End => g.last(),
        }
    }
}

/// Decides which end of each listed road sits at junction `j`.
///
/// Movements fix it directly (a movement leaves the end of `from_road` and
/// enters the start of `to_road`). Remaining roads take the endpoint closest
/// to the endpoints already placed, or failing that, closest to the other
/// listed roads' endpoints. A road with nothing to compare against is
/// returned as unresolved.
fn attach_road_ends(
    bundle: &MapBundle,
    road_ids: &HashMap<RoadId, usize>,
    j: &crate::model::Junction,
) -> (Vec<(usize, RoadEnd)>, Vec<usize>) {
    let mut placed: Vec<(usize, RoadEnd)> = Vec::new();
    let place = |placed: &mut Vec<(usize, RoadEnd)>, ri: usize, end: RoadEnd| {
        if !placed.contains(&(ri, end)) {
            placed.push((ri, end));
        }
    };
    for m in &j.movements {
        if let Some(&ri) = road_ids.get(&m.from_road) {
            place(&mut placed, ri, RoadEnd::End);
        }
        if let Some(&ri) = road_ids.get(&m.to_road) {
            place(&mut placed, ri, RoadEnd::Start);
        }
    }
    let endpoint = |ri: usize, end: RoadEnd| {
        let g = &bundle.roads[ri].geometry;
        match end {
            RoadEnd::Start => g.first(),
            RoadEnd::End => g.last(),
        }
    };
    let listed: Vec<usize> = j.road_ids.iter().filter_map(|r| road_ids.get(r).copied()).collect();
    let reference: Vec<Point> = if placed.is_empty() {
        Vec::new()
    } else {
        placed.iter().map(|&(ri, e)| endpoint(ri, e)).collect()
    };
    let mut unresolved = Vec::new();
    for &ri in &listed {
        if placed.iter().any(|&(r, _)| r == ri) {
            continue;
        }
        if reference.is_empty() && listed.iter().all(|&o| o == ri) {
            unresolved.push(ri);
            continue;
        }
        let refs: Vec<Point> = if reference.is_empty() {
            listed
                .iter()
                .filter(|&&o| o != ri)
                .flat_map(|&o| [endpoint(o, RoadEnd::Start), endpoint(o, RoadEnd::End)])
                .collect()
        } else {
            reference.clone()
        };
        let score = |p: Point| refs.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min);
        let s = score(endpoint(ri, RoadEnd::Start));
        let e = score(endpoint(ri, RoadEnd::End));
        place(&mut placed, ri, if e < s { RoadEnd::End } else { RoadEnd::Start });
    }
    (placed, unresolved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polyline;
    use crate::model::{Junction, JunctionId, Road};

    fn road(id: u64, a: (f64, f64), b: (f64, f64)) -> Road {
        Road {
            id: RoadId(id),
            geometry: Polyline::new(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]),
            lane_count: 1,
            speed_limit: 10.0,
            walkable: true,
            drivable: true,
            extra: Default::default(),
        }
    }

    fn junction(id: u64, roads: &[u64]) -> Junction {
        Junction {
            id: JunctionId(id),
            road_ids: roads.iter().map(|&r| RoadId(r)).collect(),
            movements: Vec::new(),
            signal_phases: None,
            extra: Default::default(),
        }
    }

    #[test]
    fn lone_road_junctions_take_the_free_end() {
        let mut b = MapBundle::default();
        b.roads.push(road(1, (0.0, 0.0), (100.0, 0.0)));
        // the far junction is listed first
        b.junctions.push(junction(7, &[1]));
        b.junctions.push(junction(8, &[1]));
        let m = CityMap::new(b);
        assert_eq!((m.road_start[0], m.road_end[0]), (Some(0), Some(1)));
    }

    #[test]
    fn lone_road_yields_to_a_resolved_end() {
        let mut b = MapBundle::default();
        b.roads.push(road(1, (0.0, 0.0), (100.0, 0.0)));
        b.roads.push(road(2, (0.0, 0.0), (0.0, 50.0)));
        b.junctions.push(junction(7, &[1]));
        b.junctions.push(junction(8, &[1, 2]));
        let m = CityMap::new(b);
        // road 1 starts where road 2 starts, so junction 8 holds its start
        assert_eq!((m.road_start[0], m.road_end[0]), (Some(1), Some(0)));
    }
}
