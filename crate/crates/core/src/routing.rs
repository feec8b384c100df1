//! Minimum-time routing over the mode-specific road graphs.
//!
//! Driving follows road direction and junction movements. Walking and biking
//! use walkable roads in either direction and may switch to any walkable
//! road sharing a junction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::citymap::{Anchor, CityMap, RoadEnd};
use crate::error::{Error, Result};
use crate::model::{Destination, RoadId, TravelMode};

pub const WALK_SPEED: f64 = 1.4;
pub const BIKE_SPEED: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub road_id: RoadId,
    #[serde(skip)]
    pub road: usize,
    pub direction: Direction,
    pub entry_offset: f64,
    pub exit_offset: f64,
}

impl Leg {
    pub fn length(&self) -> f64 {
        (self.exit_offset - self.entry_offset).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub mode: TravelMode,
    pub legs: Vec<Leg>,
    pub total_length: f64,
    pub estimated_time: f64,
}

impl Route {
    fn empty(mode: TravelMode) -> Self {
        Route {
            mode,
            legs: Vec::new(),
            total_length: 0.0,
            estimated_time: 0.0,
        }
    }
}

/// Where a trip starts: an AOI (any of its connections) or a road position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    Aoi(usize),
    OnRoad { road: usize, offset: f64 },
}

/// Travel speed of `mode` on a road with the given limit.
pub fn mode_speed(mode: TravelMode, speed_limit: f64) -> f64 {
    match mode {
        TravelMode::Drive => speed_limit,
        TravelMode::Walk => speed_limit.min(WALK_SPEED),
        TravelMode::Bike => speed_limit.min(BIKE_SPEED),
        TravelMode::PublicTransport => 0.0,
    }
}

fn check_mode(mode: TravelMode) -> Result<()> {
    match mode {
        TravelMode::PublicTransport => Err(Error::UnsupportedMode("public_transport")),
        _ => Ok(()),
    }
}

fn anchor_usable(map: &CityMap, a: &Anchor, mode: TravelMode) -> bool {
    let road = &map.bundle.roads[a.road];
    match mode {
        TravelMode::Drive => a.drive && road.drivable,
        _ => a.walk && road.walkable,
    }
}

pub fn plan_route(map: &CityMap, from: Origin, to: Destination, mode: TravelMode) -> Result<Route> {
    check_mode(mode)?;
    let dest_aoi = map.destination_aoi(to)?;
    let sources: Vec<Anchor> = match from {
        Origin::Aoi(a) if a == dest_aoi => return Ok(Route::empty(mode)),
        Origin::Aoi(a) => map.aoi_anchors[a].clone(),
        Origin::OnRoad { road, offset } => vec![Anchor {
            road,
            offset,
            walk: true,
            drive: true,
        }],
    };
    plan_between(map, &sources, &map.aoi_anchors[dest_aoi], mode)
}

/// Search state: a road entered at one of its ends, heading along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Node {
    road: usize,
    forward: bool,
}

impl Node {
    fn slot(&self) -> usize {
        self.road * 2 + usize::from(!self.forward)
    }
}

#[derive(Debug, Clone, Copy)]
enum Pred {
    Source(usize),
    Node(Node),
}

struct Entry {
    cost: f64,
    road_id: RoadId,
    node: Node,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.road_id.cmp(&self.road_id))
            .then_with(|| other.node.forward.cmp(&self.node.forward))
    }
}

/// Multi-source, multi-target search between road anchors.
pub fn plan_between(map: &CityMap, sources: &[Anchor], targets: &[Anchor], mode: TravelMode) -> Result<Route> {
    check_mode(mode)?;
    let roads = &map.bundle.roads;
    let speed = |r: usize| mode_speed(mode, roads[r].speed_limit);
    let len = |r: usize| map.road_length[r];
    let drive = mode == TravelMode::Drive;
    let sources: Vec<Anchor> = sources.iter().copied().filter(|a| anchor_usable(map, a, mode)).collect();
    let targets: Vec<Anchor> = targets.iter().copied().filter(|a| anchor_usable(map, a, mode)).collect();
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::NoRoute);
    }

    // best complete route found so far: (cost, legs)
    let mut best: Option<(f64, Vec<Leg>)> = None;
    let consider = |cost: f64, legs: Vec<Leg>, best: &mut Option<(f64, Vec<Leg>)>| {
        let better = match best {
            None => true,
            Some((c, l)) => {
                cost < *c
                    || (cost == *c
                        && legs.iter().map(|l| l.road_id).lt(l.iter().map(|l| l.road_id)))
            }
        };
        if better {
            *best = Some((cost, legs));
        }
    };
    let leg = |road: usize, forward: bool, from: f64, to: f64| Leg {
        road_id: roads[road].id,
        road,
        direction: if forward { Direction::Forward } else { Direction::Backward },
        entry_offset: from,
        exit_offset: to,
    };

    // same-road trips need no junction
    for s in &sources {
        for t in targets.iter().filter(|t| t.road == s.road) {
            let forward = t.offset >= s.offset;
            if drive && !forward {
                continue;
            }
            let cost = (t.offset - s.offset).abs() / speed(s.road);
            consider(cost, vec![leg(s.road, forward, s.offset, t.offset)], &mut best);
        }
    }

    let n_slots = roads.len() * 2;
    let mut dist = vec![f64::INFINITY; n_slots];
    let mut pred: Vec<Option<Pred>> = vec![None; n_slots];
    let mut done = vec![false; n_slots];
    let mut heap = BinaryHeap::new();

    let relax = |node: Node, cost: f64, from: Pred, dist: &mut Vec<f64>, pred: &mut Vec<Option<Pred>>, heap: &mut BinaryHeap<Entry>| {
        let slot = node.slot();
        let better = cost < dist[slot]
            || (cost == dist[slot]
                && match (from, pred[slot]) {
                    (Pred::Node(a), Some(Pred::Node(b))) => roads[a.road].id < roads[b.road].id,
                    _ => false,
                });
        if better {
            dist[slot] = cost;
            pred[slot] = Some(from);
            heap.push(Entry {
                cost,
                road_id: roads[node.road].id,
                node,
            });
        }
    };

    // leaving a road at a junction: the roads one may continue on
    let continue_from = |road: usize, at_end: bool| -> Vec<Node> {
        if drive {
            if at_end {
                map.drive_successors[road]
                    .iter()
                    .map(|&r| Node { road: r, forward: true })
                    .collect()
            } else {
                Vec::new()
            }
        } else {
            let j = if at_end { map.road_end[road] } else { map.road_start[road] };
            let Some(j) = j else { return Vec::new() };
            let mut next: Vec<Node> = map.junction_ends[j]
                .iter()
                .filter(|(r, _)| roads[*r].walkable)
                .map(|&(r, end)| Node {
                    road: r,
                    forward: end == RoadEnd::Start,
                })
                .collect();
            next.sort();
            next
        }
    };

    for (si, s) in sources.iter().enumerate() {
        let v = speed(s.road);
        let exits: &[bool] = if drive { &[true] } else { &[true, false] };
        for &at_end in exits {
            let cost = if at_end { (len(s.road) - s.offset) / v } else { s.offset / v };
            for node in continue_from(s.road, at_end) {
                relax(node, cost, Pred::Source(si * 2 + usize::from(!at_end)), &mut dist, &mut pred, &mut heap);
            }
        }
    }

    while let Some(Entry { cost, node, .. }) = heap.pop() {
        let slot = node.slot();
        if done[slot] || cost > dist[slot] {
            continue;
        }
        if best.as_ref().is_some_and(|(b, _)| cost > *b) {
            break;
        }
        done[slot] = true;
        let v = speed(node.road);
        let entry = if node.forward { 0.0 } else { len(node.road) };
        for t in targets.iter().filter(|t| t.road == node.road) {
            let arrival = cost + (t.offset - entry).abs() / v;
            if best.as_ref().is_none_or(|(b, _)| arrival <= *b) {
                let mut legs = unwind(&pred, &sources, node, roads, map);
                legs.push(leg(node.road, node.forward, entry, t.offset));
                consider(arrival, legs, &mut best);
            }
        }
        let through = cost + len(node.road) / v;
        for next in continue_from(node.road, node.forward) {
            if next.road == node.road && next.forward != node.forward {
                continue;
            }
            relax(next, through, Pred::Node(node), &mut dist, &mut pred, &mut heap);
        }
    }

    let (cost, legs) = best.ok_or(Error::NoRoute)?;
    let total_length = legs.iter().map(Leg::length).sum();
    Ok(Route {
        mode,
        legs,
        total_length,
        estimated_time: cost,
    })
}

/// Legs from the source up to (not including) `node`.
fn unwind(
    pred: &[Option<Pred>],
    sources: &[Anchor],
    node: Node,
    roads: &[crate::model::Road],
    map: &CityMap,
) -> Vec<Leg> {
    let mut rev = Vec::new();
    let mut cur = node;
    loop {
        match pred[cur.slot()].expect("settled node has a predecessor") {
            Pred::Source(tag) => {
                let s = sources[tag / 2];
                let at_end = tag % 2 == 0;
                rev.push(Leg {
                    road_id: roads[s.road].id,
                    road: s.road,
                    direction: if at_end { Direction::Forward } else { Direction::Backward },
                    entry_offset: s.offset,
                    exit_offset: if at_end { map.road_length[s.road] } else { 0.0 },
                });
                break;
            }
            Pred::Node(p) => {
                let len = map.road_length[p.road];
                rev.push(Leg {
                    road_id: roads[p.road].id,
                    road: p.road,
                    direction: if p.forward { Direction::Forward } else { Direction::Backward },
                    entry_offset: if p.forward { 0.0 } else { len },
                    exit_offset: if p.forward { len } else { 0.0 },
                });
                cur = p;
            }
        }
    }
    rev.reverse();
    rev
}
