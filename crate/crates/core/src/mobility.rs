//! Per-step movement of every person: the trip state machine, vehicles on
//! lanes (IDM + MOBIL with half-second substeps) and kinematic walkers.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use crate::carfollow::{
    gap, idm_acceleration, integrate, lane_accelerations, mobil_decide, project_gaps, Car, IdmParams,
    LaneChangeContext, LaneDecision, MobilParams, Obstacle, VEHICLE_LENGTH,
};
use crate::citymap::CityMap;
use crate::error::{Error, Result};
use crate::events::{RawEvent, Trigger, TripStatus};
use crate::geometry::Point;
use crate::model::{Money, Person, PersonId, TravelMode, Trip};
use crate::routing::{mode_speed, plan_route, Direction, Origin, Route};
use crate::snapshot::{congestion_level, AoiRuntime, PersonRuntime, PersonStatus, RoadRuntime};

pub const RECENT_WINDOW_STEPS: u64 = 300;

#[derive(Debug, Clone, Default)]
pub struct MobilityParams {
    pub idm: IdmParams,
    pub mobil: MobilParams,
}

const SUBSTEPS: usize = 2;

#[derive(Debug, Clone)]
enum Location {
    Aoi(usize),
    /// Trip started but no room to enter the first road yet.
    Departing(usize),
    Vehicle { road: usize },
    Walking { road: usize, offset: f64, speed: f64 },
}

#[derive(Debug, Clone)]
struct Journey {
    trip: Trip,
    route: Route,
    leg: usize,
    dest_aoi: usize,
    started: i64,
}

impl Journey {
    fn on_last_leg(&self) -> bool {
        self.leg + 1 == self.route.legs.len()
    }
}

#[derive(Debug, Clone)]
struct PersonSim {
    id: PersonId,
    loc: Location,
    pending: VecDeque<Trip>,
    journey: Option<Journey>,
}

#[derive(Debug, Clone, Default)]
struct RoadSim {
    /// Front (largest offset) first.
    lanes: Vec<Vec<Car>>,
    walkers: BTreeSet<usize>,
}

#[derive(Debug, Clone, Default)]
struct AoiSim {
    people: BTreeSet<usize>,
    entries: VecDeque<u64>,
    departures: VecDeque<u64>,
}

/// A trip that ended this step, successfully or not.
#[derive(Debug, Clone, PartialEq)]
pub struct FinishedTrip {
    pub person: usize,
    pub person_id: PersonId,
    pub trip: Trip,
    pub status: TripStatus,
    pub depart_time: i64,
    pub finish_time: i64,
    pub length: f64,
}

#[derive(Debug, Default)]
pub struct StepOutput {
    pub events: Vec<RawEvent>,
    pub finished: Vec<FinishedTrip>,
}

impl StepOutput {
    pub fn clear(&mut self) {
        self.events.clear();
        self.finished.clear();
    }

    /// Drops enter/leave pairs that cancel within the step, so the events
    /// match what per-step polling of occupancy observes.
    pub fn net_transitions(&mut self) {
        let opposite = |t: Trigger| match t {
            Trigger::EnterAoi => Some(Trigger::LeaveAoi),
            Trigger::LeaveAoi => Some(Trigger::EnterAoi),
            Trigger::EnterRoad => Some(Trigger::LeaveRoad),
            Trigger::LeaveRoad => Some(Trigger::EnterRoad),
            _ => None,
        };
        let mut open: HashMap<(PersonId, Trigger, u64), usize> = HashMap::new();
        let mut keep = vec![true; self.events.len()];
        for (i, e) in self.events.iter().enumerate() {
            let Some(inv) = opposite(e.trigger) else { continue };
            if let Some(j) = open.remove(&(e.person_id, inv, e.target_id)) {
                keep[i] = false;
                keep[j] = false;
            } else {
                open.insert((e.person_id, e.trigger, e.target_id), i);
            }
        }
        let mut k = keep.into_iter();
        self.events.retain(|_| k.next().unwrap());
    }

    fn emit(&mut self, trigger: Trigger, person: PersonId, target: u64) {
        self.events.push(RawEvent::new(trigger, person, target));
    }

    fn finish(&mut self, p: &PersonSim, person: usize, trip: Trip, status: TripStatus, depart: i64, now: i64, length: f64) {
        let mut ev = RawEvent::new(Trigger::TripFinish, p.id, p.id.0);
        ev.status = Some(status);
        self.events.push(ev);
        self.finished.push(FinishedTrip {
            person,
            person_id: p.id,
            trip,
            status,
            depart_time: depart,
            finish_time: now,
            length,
        });
    }
}

#[derive(Debug)]
pub struct World {
    map: Arc<CityMap>,
    params: MobilityParams,
    persons: Vec<PersonSim>,
    person_ids: HashMap<PersonId, usize>,
    roads: Vec<RoadSim>,
    aois: Vec<AoiSim>,
    accel: Vec<f64>,
    now: i64,
    step: u64,
}

impl World {
    /// Places every person idle in their home AOI with their trip list pending.
    pub fn new(map: Arc<CityMap>, persons: &[Person], params: MobilityParams) -> Result<Self> {
        let mut sorted: Vec<&Person> = persons.iter().collect();
        sorted.sort_by_key(|p| p.id);
        let mut aois = vec![AoiSim::default(); map.bundle.aois.len()];
        let mut sims = Vec::with_capacity(sorted.len());
        let mut person_ids = HashMap::with_capacity(sorted.len());
        for (i, p) in sorted.iter().enumerate() {
            if person_ids.insert(p.id, i).is_some() {
                return Err(Error::BadConfig(format!("duplicate person id {}", p.id)));
            }
            let home = map.aoi_index(p.home)?;
            aois[home].people.insert(i);
            sims.push(PersonSim {
                id: p.id,
                loc: Location::Aoi(home),
                pending: p.trips.iter().cloned().collect(),
                journey: None,
            });
        }
        let roads = map
            .bundle
            .roads
            .iter()
            .map(|r| RoadSim {
                lanes: vec![Vec::new(); r.lane_count.max(1) as usize],
                walkers: BTreeSet::new(),
            })
            .collect();
        Ok(Self {
            map,
            params,
            persons: sims,
            person_ids,
            roads,
            aois,
            accel: Vec::new(),
            now: 0,
            step: 0,
        })
    }

    pub fn map(&self) -> &Arc<CityMap> {
        &self.map
    }

    pub fn person_count(&self) -> usize {
        self.persons.len()
    }

    pub fn person_index(&self, id: PersonId) -> Result<usize> {
        self.person_ids.get(&id).copied().ok_or(Error::UnknownPerson(id))
    }

    pub fn person_id(&self, index: usize) -> PersonId {
        self.persons[index].id
    }

    pub fn pending_trips(&self, person: usize) -> Vec<Trip> {
        self.persons[person].pending.iter().cloned().collect()
    }

    pub fn current_trip(&self, person: usize) -> Option<&Trip> {
        self.persons[person].journey.as_ref().map(|j| &j.trip)
    }

    /// Replaces the not-yet-started trips; a trip in progress is untouched.
    pub fn set_pending(&mut self, person: usize, trips: Vec<Trip>) {
        self.persons[person].pending = trips.into();
    }

    pub fn status(&self, person: usize) -> PersonStatus {
        let p = &self.persons[person];
        if p.journey.is_some() {
            PersonStatus::Traveling
        } else if p.pending.is_empty() {
            PersonStatus::IdleAtAoi
        } else {
            PersonStatus::WaitingDepart
        }
    }

    /// AOI the person is currently inside, if any.
    pub fn person_aoi(&self, person: usize) -> Option<usize> {
        match self.persons[person].loc {
            Location::Aoi(a) | Location::Departing(a) => Some(a),
            _ => None,
        }
    }

    pub fn aoi_people(&self, aoi: usize) -> impl Iterator<Item = PersonId> + '_ {
        self.aois[aoi].people.iter().map(|&i| self.persons[i].id)
    }

    /// Road the person is on, while traveling.
    pub fn person_road(&self, person: usize) -> Option<usize> {
        match self.persons[person].loc {
            Location::Vehicle { road } | Location::Walking { road, .. } => Some(road),
            _ => None,
        }
    }

    pub fn vehicles_on(&self, road: usize) -> impl Iterator<Item = &Car> {
        self.roads[road].lanes.iter().flatten()
    }

    /// Cars of one lane, front first.
    pub fn lane(&self, road: usize, lane: usize) -> &[Car] {
        &self.roads[road].lanes[lane]
    }

    pub fn lane_count(&self, road: usize) -> usize {
        self.roads[road].lanes.len()
    }

    pub fn traveling_count(&self) -> usize {
        self.persons.iter().filter(|p| p.journey.is_some()).count()
    }

    /// Position, speed and unit heading of every person, indexed like persons.
    pub fn kinematics(&self) -> Vec<(Point, f64, Point)> {
        let zero = Point::new(0.0, 0.0);
        let mut out: Vec<(Point, f64, Point)> = self
            .persons
            .iter()
            .map(|p| match p.loc {
                Location::Aoi(a) | Location::Departing(a) => (self.map.aoi_centroid[a], 0.0, zero),
                Location::Walking { road, offset, speed } => {
                    let forward = p
                        .journey
                        .as_ref()
                        .is_some_and(|j| j.route.legs[j.leg].direction == Direction::Forward);
                    let (pt, d) = self.map.bundle.roads[road].geometry.point_at(offset);
                    let d = if forward { d } else { Point::new(-d.x, -d.y) };
                    (pt, speed, d)
                }
                Location::Vehicle { .. } => (zero, 0.0, zero),
            })
            .collect();
        for (ri, r) in self.roads.iter().enumerate() {
            let g = &self.map.bundle.roads[ri].geometry;
            for car in r.lanes.iter().flatten() {
                let (pt, d) = g.point_at(car.offset);
                out[car.id] = (pt, car.speed, d);
            }
        }
        out
    }

    pub fn person_runtime(&self, person: usize, kin: (Point, f64, Point), balance: Money, step: u64) -> PersonRuntime {
        let p = &self.persons[person];
        PersonRuntime {
            id: p.id,
            coordinate: kin.0,
            speed: kin.1,
            direction: kin.2,
            current_trip: p.journey.as_ref().map(|j| j.trip.clone()),
            pending_trips: p.pending.iter().cloned().collect(),
            balance,
            status: self.status(person),
            step,
        }
    }

    pub fn aoi_runtime(&self, aoi: usize, step: u64) -> AoiRuntime {
        let a = &self.map.bundle.aois[aoi];
        let s = &self.aois[aoi];
        let horizon = step.saturating_sub(RECENT_WINDOW_STEPS);
        let recent = |q: &VecDeque<u64>| q.iter().filter(|&&t| t >= horizon && t < step).count() as u64;
        AoiRuntime {
            id: a.id,
            area_m2: a.area(),
            population: a.population,
            land_use: a.land_use,
            poi_count: self.map.aoi_poi_count[aoi],
            connected_roads: a.connected_roads(),
            people: s.people.iter().map(|&i| self.persons[i].id).collect(),
            recent_entries: recent(&s.entries),
            recent_departures: recent(&s.departures),
            step,
        }
    }

    pub fn road_runtime(&self, road: usize, step: u64) -> RoadRuntime {
        let r = &self.map.bundle.roads[road];
        let s = &self.roads[road];
        let mut vehicles: Vec<PersonId> = s.lanes.iter().flatten().map(|c| self.persons[c.id].id).collect();
        vehicles.sort();
        let speeds: Vec<f64> = s.lanes.iter().flatten().map(|c| c.speed).collect();
        let (average_speed, level) = congestion_level(&speeds, r.speed_limit);
        RoadRuntime {
            id: r.id,
            length_m: self.map.road_length[road],
            lane_count: r.lane_count,
            speed_limit: r.speed_limit,
            vehicles,
            pedestrians: s.walkers.iter().map(|&i| self.persons[i].id).collect(),
            average_speed,
            congestion_level: level,
            step,
        }
    }

    pub fn road_occupancy(&self, road: usize) -> (usize, usize) {
        let s = &self.roads[road];
        (s.lanes.iter().map(Vec::len).sum(), s.walkers.len())
    }

    /// Advances everything by one second. `now` is absolute simulation time
    /// at the start of the step, `step` the index stamped on recent counters.
    pub fn advance(&mut self, now: i64, step: u64, out: &mut StepOutput) {
        self.now = now;
        self.step = step;
        self.prune_recent(step);
        self.depart(out);
        self.walk(out);
        self.drive(out);
    }

    fn prune_recent(&mut self, step: u64) {
        let horizon = step.saturating_sub(RECENT_WINDOW_STEPS);
        for a in &mut self.aois {
            while a.entries.front().is_some_and(|&t| t < horizon) {
                a.entries.pop_front();
            }
            while a.departures.front().is_some_and(|&t| t < horizon) {
                a.departures.pop_front();
            }
        }
    }

    fn depart(&mut self, out: &mut StepOutput) {
        let now = self.now;
        for pi in 0..self.persons.len() {
            loop {
                match self.persons[pi].loc {
                    Location::Departing(aoi) => {
                        self.try_enter_road(pi, aoi, out);
                        break;
                    }
                    Location::Aoi(aoi) => {
                        let p = &mut self.persons[pi];
                        if p.journey.is_some() || p.pending.front().is_none_or(|t| t.depart_time > now) {
                            break;
                        }
                        let trip = p.pending.pop_front().expect("checked non-empty");
                        let route = plan_route(&self.map, Origin::Aoi(aoi), trip.end, trip.mode);
                        let p = &self.persons[pi];
                        match route {
                            Err(_) => {
                                out.finish(p, pi, trip, TripStatus::Failed, now, now, 0.0);
                            }
                            Ok(route) if route.legs.is_empty() => {
                                out.emit(Trigger::TripStart, p.id, p.id.0);
                                out.finish(p, pi, trip, TripStatus::Ok, now, now, 0.0);
                            }
                            Ok(route) => {
                                out.emit(Trigger::TripStart, p.id, p.id.0);
                                let dest_aoi = self.map.destination_aoi(trip.end).expect("routed destination resolves");
                                let p = &mut self.persons[pi];
                                p.journey = Some(Journey {
                                    trip,
                                    route,
                                    leg: 0,
                                    dest_aoi,
                                    started: now,
                                });
                                p.loc = Location::Departing(aoi);
                            }
                        }
                    }
                    _ => break,
                }
            }
        }
    }

    fn try_enter_road(&mut self, pi: usize, aoi: usize, out: &mut StepOutput) {
        let j = self.persons[pi].journey.as_ref().expect("departing person has a journey");
        let leg = j.route.legs[0];
        let mode = j.route.mode;
        let road = leg.road;
        let limit = self.map.bundle.roads[road].speed_limit;
        if mode == TravelMode::Drive {
            let s0 = self.params.idm.min_gap;
            let lanes = &self.roads[road].lanes;
            let x = leg.entry_offset;
            let lane = (0..lanes.len())
                .find(|&l| insertion_gap(&lanes[l], x) >= s0)
                .or_else(|| (0..lanes.len()).find(|&l| insertion_gap(&lanes[l], x) >= 0.0));
            let Some(lane) = lane else { return };
            insert_sorted(
                &mut self.roads[road].lanes[lane],
                Car {
                    id: pi,
                    offset: x,
                    speed: 0.0,
                    desired_speed: limit,
                },
            );
            self.persons[pi].loc = Location::Vehicle { road };
        } else {
            self.roads[road].walkers.insert(pi);
            self.persons[pi].loc = Location::Walking {
                road,
                offset: leg.entry_offset,
                speed: mode_speed(mode, limit),
            };
        }
        let id = self.persons[pi].id;
        self.aois[aoi].people.remove(&pi);
        self.aois[aoi].departures.push_back(self.step);
        out.emit(Trigger::LeaveAoi, id, self.map.bundle.aois[aoi].id.0);
        out.emit(Trigger::EnterRoad, id, self.map.bundle.roads[road].id.0);
        // a first leg that is also the last and has no length
        if self.persons[pi].journey.as_ref().is_some_and(|j| j.on_last_leg()) && leg.length() == 0.0 {
            self.remove_from_road(pi, road);
            self.arrive(pi, road, out);
        }
    }

    fn remove_from_road(&mut self, pi: usize, road: usize) {
        let r = &mut self.roads[road];
        r.walkers.remove(&pi);
        for lane in &mut r.lanes {
            lane.retain(|c| c.id != pi);
        }
    }

    fn arrive(&mut self, pi: usize, road: usize, out: &mut StepOutput) {
        let p = &mut self.persons[pi];
        let j = p.journey.take().expect("arriving person has a journey");
        p.loc = Location::Aoi(j.dest_aoi);
        let p = &self.persons[pi];
        out.emit(Trigger::LeaveRoad, p.id, self.map.bundle.roads[road].id.0);
        out.emit(Trigger::EnterAoi, p.id, self.map.bundle.aois[j.dest_aoi].id.0);
        out.finish(p, pi, j.trip, TripStatus::Ok, j.started, self.now, j.route.total_length);
        let a = &mut self.aois[j.dest_aoi];
        a.people.insert(pi);
        a.entries.push_back(self.step);
    }

    fn walk(&mut self, out: &mut StepOutput) {
        for pi in 0..self.persons.len() {
            let mut budget = 1.0;
            loop {
                let p = &self.persons[pi];
                let Location::Walking { road, offset, speed } = p.loc else { break };
                let j = p.journey.as_ref().expect("walker has a journey");
                let leg = j.route.legs[j.leg];
                let remaining = (leg.exit_offset - offset).abs();
                let reach = speed * budget;
                // tolerance absorbs accumulated rounding of repeated increments
                if reach < remaining - 1e-9 {
                    let sign = if leg.direction == Direction::Forward { 1.0 } else { -1.0 };
                    self.persons[pi].loc = Location::Walking {
                        road,
                        offset: offset + sign * reach,
                        speed,
                    };
                    break;
                }
                budget -= remaining / speed;
                if j.on_last_leg() {
                    self.roads[road].walkers.remove(&pi);
                    self.arrive(pi, road, out);
                    break;
                }
                let next = j.route.legs[j.leg + 1];
                let mode = j.route.mode;
                let id = p.id;
                self.roads[road].walkers.remove(&pi);
                out.emit(Trigger::LeaveRoad, id, self.map.bundle.roads[road].id.0);
                out.emit(Trigger::EnterRoad, id, next.road_id.0);
                self.roads[next.road].walkers.insert(pi);
                let p = &mut self.persons[pi];
                p.journey.as_mut().expect("journey").leg += 1;
                p.loc = Location::Walking {
                    road: next.road,
                    offset: next.entry_offset,
                    speed: mode_speed(mode, self.map.bundle.roads[next.road].speed_limit),
                };
            }
        }
    }

    fn journey_of(&self, car: &Car) -> &Journey {
        self.persons[car.id].journey.as_ref().expect("every car belongs to a traveling person")
    }

    fn turn_allowed(&self, from: usize, to: usize) -> bool {
        let roads = &self.map.bundle.roads;
        self.map.road_end[from]
            .is_some_and(|j| self.map.bundle.junctions[j].is_green(roads[from].id, roads[to].id, self.now))
    }

    /// What the front car of a lane on `road` sees ahead: nothing on its
    /// final leg, a stop line at red, else the tail of the next road.
    fn front_obstacle(&self, road: usize, car: &Car) -> Obstacle {
        let j = self.journey_of(car);
        if j.on_last_leg() {
            return Obstacle::Free;
        }
        let next = j.route.legs[j.leg + 1].road;
        let end = self.map.road_length[road];
        if !self.turn_allowed(road, next) {
            return Obstacle::At {
                position: end,
                speed: 0.0,
            };
        }
        let mut best: Option<(f64, f64)> = None;
        for lane in &self.roads[next].lanes {
            let Some(last) = lane.last() else { return Obstacle::Free };
            let rear = last.offset - VEHICLE_LENGTH;
            if best.is_none_or(|(b, _)| rear > b) {
                best = Some((rear, last.speed));
            }
        }
        match best {
            Some((rear, speed)) => Obstacle::At {
                position: end + rear,
                speed,
            },
            None => Obstacle::Free,
        }
    }

    fn accel_behind(&self, road: usize, car: &Car, leader: Option<&Car>) -> f64 {
        let p = &self.params.idm;
        match leader {
            Some(l) => idm_acceleration(car.speed, car.desired_speed, gap(l.offset, car.offset), car.speed - l.speed, p),
            None => match self.front_obstacle(road, car) {
                Obstacle::Free => idm_acceleration(car.speed, car.desired_speed, f64::INFINITY, 0.0, p),
                Obstacle::At { position, speed } => {
                    idm_acceleration(car.speed, car.desired_speed, position - car.offset, car.speed - speed, p)
                }
            },
        }
    }

    /// MOBIL for car `i` of lane `l`: the lane to move to, right side first.
    fn choose_lane(&self, road: usize, l: usize, i: usize) -> Option<usize> {
        let lanes = &self.roads[road].lanes;
        let own = &lanes[l];
        let me = own[i];
        let leader = i.checked_sub(1).map(|k| &own[k]);
        let old_follower = own.get(i + 1);
        let a_c = self.accel_behind(road, &me, leader);
        let (a_o, a_o_after) = match old_follower {
            Some(o) => (self.accel_behind(road, o, Some(&me)), self.accel_behind(road, o, leader)),
            None => (0.0, 0.0),
        };
        let candidates = [l.checked_sub(1), (l + 1 < lanes.len()).then_some(l + 1)];
        for t in candidates.into_iter().flatten() {
            let target = &lanes[t];
            let p = target.partition_point(|c| c.offset > me.offset);
            let lead = p.checked_sub(1).map(|k| &target[k]);
            let follow = target.get(p);
            if lead.is_some_and(|c| gap(c.offset, me.offset) < 0.0) || follow.is_some_and(|c| gap(me.offset, c.offset) < 0.0)
            {
                continue;
            }
            let (a_n, a_n_after) = match follow {
                Some(n) => (self.accel_behind(road, n, lead), self.accel_behind(road, n, Some(&me))),
                None => (0.0, 0.0),
            };
            let ctx = LaneChangeContext {
                own: a_c,
                own_after: self.accel_behind(road, &me, lead),
                new_follower: a_n,
                new_follower_after: a_n_after,
                old_follower: a_o,
                old_follower_after: a_o_after,
            };
            if mobil_decide(&ctx, &self.params.mobil) == LaneDecision::Change {
                return Some(t);
            }
        }
        None
    }

    fn lane_changes(&mut self) {
        for road in 0..self.roads.len() {
            let n = self.roads[road].lanes.len();
            if n < 2 {
                continue;
            }
            for l in 0..n {
                let mut i = 0;
                while i < self.roads[road].lanes[l].len() {
                    match self.choose_lane(road, l, i) {
                        Some(t) => {
                            let car = self.roads[road].lanes[l].remove(i);
                            insert_sorted(&mut self.roads[road].lanes[t], car);
                        }
                        None => i += 1,
                    }
                }
            }
        }
    }

    fn drive(&mut self, out: &mut StepOutput) {
        self.lane_changes();
        let dt = 1.0 / SUBSTEPS as f64;
        let mut all = std::mem::take(&mut self.accel);
        let mut scratch = Vec::new();
        for _ in 0..SUBSTEPS {
            all.clear();
            for (r, road) in self.roads.iter().enumerate() {
                for lane in &road.lanes {
                    if let Some(front) = lane.first() {
                        lane_accelerations(lane, self.front_obstacle(r, front), &self.params.idm, &mut scratch);
                        all.extend_from_slice(&scratch);
                    }
                }
            }
            let mut k = 0;
            for road in &mut self.roads {
                for lane in &mut road.lanes {
                    let n = lane.len();
                    integrate(lane, &all[k..k + n], dt);
                    project_gaps(lane, None);
                    k += n;
                }
            }
            for r in 0..self.roads.len() {
                self.resolve_road_end(r, out);
            }
        }
        self.accel = all;
    }

    /// Arrivals, then junction crossings, for every lane of `road`.
    fn resolve_road_end(&mut self, road: usize, out: &mut StepOutput) {
        let end = self.map.road_length[road];
        let s0 = self.params.idm.min_gap;
        for l in 0..self.roads[road].lanes.len() {
            let mut i = 0;
            while i < self.roads[road].lanes[l].len() {
                let car = self.roads[road].lanes[l][i];
                let j = self.journey_of(&car);
                if j.on_last_leg() && car.offset >= j.route.legs[j.leg].exit_offset {
                    self.roads[road].lanes[l].remove(i);
                    self.arrive(car.id, road, out);
                } else {
                    i += 1;
                }
            }
            while let Some(&front) = self.roads[road].lanes[l].first() {
                if front.offset <= end {
                    break;
                }
                let j = self.journey_of(&front);
                let next = j.route.legs[j.leg + 1];
                let x = (front.offset - end).min(self.map.road_length[next.road]);
                let target = if self.turn_allowed(road, next.road) {
                    let lanes = &self.roads[next.road].lanes;
                    (0..lanes.len()).find(|&k| insertion_gap(&lanes[k], x) >= s0)
                } else {
                    None
                };
                let Some(k) = target else {
                    let lane = &mut self.roads[road].lanes[l];
                    lane[0].offset = end;
                    lane[0].speed = 0.0;
                    project_gaps(lane, None);
                    break;
                };
                self.roads[road].lanes[l].remove(0);
                insert_sorted(
                    &mut self.roads[next.road].lanes[k],
                    Car {
                        offset: x,
                        desired_speed: self.map.bundle.roads[next.road].speed_limit,
                        ..front
                    },
                );
                let p = &mut self.persons[front.id];
                p.loc = Location::Vehicle { road: next.road };
                let j = p.journey.as_mut().expect("journey");
                j.leg += 1;
                let arrived = j.on_last_leg() && x >= next.exit_offset;
                let id = p.id;
                out.emit(Trigger::LeaveRoad, id, self.map.bundle.roads[road].id.0);
                out.emit(Trigger::EnterRoad, id, next.road_id.0);
                if arrived {
                    self.remove_from_road(front.id, next.road);
                    self.arrive(front.id, next.road, out);
                }
            }
        }
    }
}

/// Smallest bumper gap a car placed at `x` would have to its neighbours.
fn insertion_gap(lane: &[Car], x: f64) -> f64 {
    let p = lane.partition_point(|c| c.offset > x);
    let ahead = if p > 0 { gap(lane[p - 1].offset, x) } else { f64::INFINITY };
    let behind = lane.get(p).map_or(f64::INFINITY, |c| gap(x, c.offset));
    ahead.min(behind)
}

fn insert_sorted(lane: &mut Vec<Car>, car: Car) {
    let p = lane.partition_point(|c| c.offset > car.offset);
    lane.insert(p, car);
}
