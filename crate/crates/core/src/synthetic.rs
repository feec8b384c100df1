//! Generated cities: a straight corridor and Manhattan-style grids of any size.

use std::collections::BTreeMap;

use serde_json::Map;

use crate::geometry::{Point, Polygon, Polyline};
use crate::ingest::enrich;
use crate::model::{
    Aoi, AoiId, Category, Enterprise, Junction, JunctionId, LandUse, MapBundle, Metadata, Movement, Poi, PoiId,
    Road, RoadId, SignalPhase, TurnType,
};

fn road(id: u64, a: Point, b: Point, lanes: u32, limit: f64) -> Road {
    Road {
        id: RoadId(id),
        geometry: Polyline::new(vec![a, b]),
        lane_count: lanes,
        speed_limit: limit,
        walkable: true,
        drivable: true,
        extra: Map::new(),
    }
}

fn aoi(id: u64, boundary: Polygon, land_use: LandUse, population: u64) -> Aoi {
    Aoi {
        id: AoiId(id),
        boundary,
        land_use,
        population,
        connections: None,
        enterprises: Vec::new(),
        consumption: BTreeMap::new(),
        rent: 0,
        area: None,
        extra: Map::new(),
    }
}

/// One straight road along +x with an AOI beside each end. AOI 1 connects
/// at offset 10, AOI 2 at `length - 10`.
pub fn corridor(length: f64, speed_limit: f64, lanes: u32) -> MapBundle {
    let mut b = MapBundle {
        metadata: Metadata {
            name: "corridor".into(),
            ..Metadata::default()
        },
        roads: vec![road(1, Point::new(0.0, 0.0), Point::new(length, 0.0), lanes, speed_limit)],
        aois: vec![
            aoi(1, Polygon::rect(Point::new(0.0, 10.0), Point::new(20.0, 30.0)), LandUse::Residential, 10),
            aoi(
                2,
                Polygon::rect(Point::new(length - 20.0, 10.0), Point::new(length, 30.0)),
                LandUse::Commercial,
                0,
            ),
        ],
        ..MapBundle::default()
    };
    enrich(&mut b);
    b
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Junctions per row and per column.
    pub size: usize,
    pub spacing: f64,
    pub lanes: u32,
    pub speed_limit: f64,
    /// Distance between the AOI square and the surrounding roads.
    pub aoi_inset: f64,
    pub signals: bool,
    pub population: u64,
    pub pois_per_commercial: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            size: 5,
            spacing: 200.0,
            lanes: 2,
            speed_limit: 13.0,
            aoi_inset: 25.0,
            signals: true,
            population: 100,
            pois_per_commercial: 3,
        }
    }
}

const POI_CATEGORIES: [&str; 3] = ["food.restaurant.noodles", "shopping.store.grocery", "leisure.park.garden"];

fn turn_type(from: (f64, f64), to: (f64, f64)) -> TurnType {
    let cross = from.0 * to.1 - from.1 * to.0;
    let dot = from.0 * to.0 + from.1 * to.1;
    if dot > 0.5 {
        TurnType::Straight
    } else if dot < -0.5 {
        TurnType::Uturn
    } else if cross > 0.0 {
        TurnType::Left
    } else {
        TurnType::Right
    }
}

/// Two-way grid: every pair of neighbouring junctions is joined by two
/// opposite one-way roads. Blocks alternate residential / commercial, with
/// every fifth block industrial.
pub fn grid_city(spec: &GridSpec) -> MapBundle {
    let n = spec.size;
    let s = spec.spacing;
    let jid = |r: usize, c: usize| (r * n + c) as u64 + 1;
    let jpos = |r: usize, c: usize| Point::new(c as f64 * s, r as f64 * s);

    let mut roads = Vec::new();
    // (road id, from junction, to junction)
    let mut links: Vec<(u64, u64, u64)> = Vec::new();
    let mut add = |a: (usize, usize), b: (usize, usize), roads: &mut Vec<Road>| {
        for (x, y) in [(a, b), (b, a)] {
            let id = roads.len() as u64 + 1;
            roads.push(road(id, jpos(x.0, x.1), jpos(y.0, y.1), spec.lanes, spec.speed_limit));
            links.push((id, jid(x.0, x.1), jid(y.0, y.1)));
        }
    };
    for r in 0..n {
        for c in 0..n {
            if c + 1 < n {
                add((r, c), (r, c + 1), &mut roads);
            }
            if r + 1 < n {
                add((r, c), (r + 1, c), &mut roads);
            }
        }
    }

    let dir = |id: u64| {
        let g = &roads[id as usize - 1].geometry;
        let (a, b) = (g.first(), g.last());
        let len = a.distance(&b);
        ((b.x - a.x) / len, (b.y - a.y) / len)
    };
    let mut junctions = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let j = jid(r, c);
            let incoming: Vec<u64> = links.iter().filter(|l| l.2 == j).map(|l| l.0).collect();
            let outgoing: Vec<u64> = links.iter().filter(|l| l.1 == j).map(|l| l.0).collect();
            let mut movements = Vec::new();
            for &i in &incoming {
                for &o in &outgoing {
                    let t = turn_type(dir(i), dir(o));
                    if t != TurnType::Uturn {
                        movements.push(Movement {
                            from_road: RoadId(i),
                            to_road: RoadId(o),
                            turn_type: t,
                        });
                    }
                }
            }
            let signal_phases = (spec.signals && incoming.len() > 2).then(|| {
                let horizontal = |m: &Movement| dir(m.from_road.0).1.abs() < 0.5;
                [true, false]
                    .into_iter()
                    .map(|h| SignalPhase {
                        green: movements
                            .iter()
                            .filter(|m| horizontal(m) == h)
                            .map(|m| (m.from_road, m.to_road))
                            .collect(),
                        duration: 30,
                    })
                    .collect()
            });
            let mut road_ids: Vec<RoadId> = incoming.iter().chain(&outgoing).map(|&r| RoadId(r)).collect();
            road_ids.sort();
            junctions.push(Junction {
                id: JunctionId(j),
                road_ids,
                movements,
                signal_phases,
                extra: Map::new(),
            });
        }
    }

    let mut aois = Vec::new();
    let mut pois = Vec::new();
    for r in 0..n.saturating_sub(1) {
        for c in 0..n.saturating_sub(1) {
            let k = r * (n - 1) + c;
            let id = 1000 + k as u64;
            let land_use = if k % 5 == 4 {
                LandUse::Industrial
            } else if (r + c) % 2 == 0 {
                LandUse::Residential
            } else {
                LandUse::Commercial
            };
            let min = Point::new(c as f64 * s + spec.aoi_inset, r as f64 * s + spec.aoi_inset);
            let max = Point::new((c + 1) as f64 * s - spec.aoi_inset, (r + 1) as f64 * s - spec.aoi_inset);
            let population = if land_use == LandUse::Residential { spec.population } else { 0 };
            let mut a = aoi(id, Polygon::rect(min, max), land_use, population);
            if land_use != LandUse::Residential {
                a.enterprises.push(Enterprise {
                    name: format!("firm-{id}"),
                    category: land_use.as_str().into(),
                    registered_capital: 10_000_000,
                    employee_count: 50,
                    average_wage: 300_000,
                    extra: Map::new(),
                });
            }
            if land_use == LandUse::Commercial {
                a.consumption.insert("food".into(), 1500);
                a.consumption.insert("shopping".into(), 4000);
                for p in 0..spec.pois_per_commercial {
                    let t = (p + 1) as f64 / (spec.pois_per_commercial + 1) as f64;
                    pois.push(Poi {
                        id: PoiId(id * 100 + p as u64),
                        coordinate: min.lerp(&max, t),
                        name: format!("poi-{id}-{p}"),
                        category: Category(POI_CATEGORIES[p % POI_CATEGORIES.len()].into()),
                        aoi_id: Some(AoiId(id)),
                        brand: None,
                        extra: Map::new(),
                    });
                }
            }
            aois.push(a);
        }
    }

    let mut b = MapBundle {
        metadata: Metadata {
            name: format!("grid{n}x{n}"),
            district: Some("synthetic".into()),
            ..Metadata::default()
        },
        roads,
        junctions,
        aois,
        pois,
        ..MapBundle::default()
    };
    enrich(&mut b);
    b
}
