//! Whole-map consistency checks.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::point_in_polygon;
use crate::model::{
    AoiId, Destination, MapBundle, PoiId, RoadId, TravelMode, MAX_SPEED_LIMIT,
};

/// Connection points farther than this from their road are rejected.
pub const CONNECTION_ON_ROAD_TOLERANCE: f64 = 1.0;
/// POIs may sit this far outside their AOI polygon.
pub const POI_AOI_TOLERANCE: f64 = 5.0;
const AREA_REL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: String,
    pub subject_id: u64,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev} {} [{}]: {}", self.code, self.subject_id, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    fn error(&mut self, code: &str, subject: u64, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            code: code.to_string(),
            subject_id: subject,
            message: message.into(),
        });
    }

    fn warn(&mut self, code: &str, subject: u64, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            code: code.to_string(),
            subject_id: subject,
            message: message.into(),
        });
    }
}

fn duplicates<I: Iterator<Item = u64>>(ids: I) -> Vec<u64> {
    let mut seen = HashSet::new();
    let mut dup: Vec<u64> = ids.filter(|id| !seen.insert(*id)).collect();
    dup.sort_unstable();
    dup.dedup();
    dup
}

pub fn validate_map(bundle: &MapBundle) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (kind, dups) in [
        ("road", duplicates(bundle.roads.iter().map(|r| r.id.0))),
        ("junction", duplicates(bundle.junctions.iter().map(|j| j.id.0))),
        ("aoi", duplicates(bundle.aois.iter().map(|a| a.id.0))),
        ("poi", duplicates(bundle.pois.iter().map(|p| p.id.0))),
        ("person", duplicates(bundle.persons.iter().map(|p| p.id.0))),
    ] {
        for id in dups {
            report.error("DUPLICATE_ID", id, format!("{kind} id {id} is not unique"));
        }
    }

    let roads: HashMap<RoadId, _> = bundle.roads.iter().map(|r| (r.id, r)).collect();
    let aois: HashMap<AoiId, _> = bundle.aois.iter().map(|a| (a.id, a)).collect();
    let pois: HashMap<PoiId, _> = bundle.pois.iter().map(|p| (p.id, p)).collect();

    for road in &bundle.roads {
        if let Some(defect) = road.geometry.defect() {
            report.error("BAD_GEOMETRY", road.id.0, format!("road {}: {defect}", road.id));
        }
        if road.lane_count < 1 {
            report.error("BAD_ROAD", road.id.0, "lane_count must be at least 1");
        }
        if !(road.speed_limit > 0.0 && road.speed_limit <= MAX_SPEED_LIMIT) {
            report.error(
                "BAD_ROAD",
                road.id.0,
                format!("speed_limit {} outside (0, {MAX_SPEED_LIMIT}]", road.speed_limit),
            );
        }
    }

    for j in &bundle.junctions {
        if j.road_ids.is_empty() {
            report.error("BAD_JUNCTION", j.id.0, "junction has no roads");
        }
        for r in &j.road_ids {
            if !roads.contains_key(r) {
                report.error("DANGLING_REF", j.id.0, format!("junction {} references missing road {r}", j.id));
            }
        }
        for m in &j.movements {
            if !j.road_ids.contains(&m.from_road) || !j.road_ids.contains(&m.to_road) {
                report.error(
                    "BAD_MOVEMENT",
                    j.id.0,
                    format!("movement {}->{} uses a road not at junction {}", m.from_road, m.to_road, j.id),
                );
            }
        }
        for phase in j.signal_phases.iter().flatten() {
            if phase.duration == 0 {
                report.error("BAD_PHASE", j.id.0, "signal phase duration must be positive");
            }
        }
    }

    for aoi in &bundle.aois {
        if let Some(defect) = aoi.boundary.defect() {
            report.error("BAD_POLYGON", aoi.id.0, format!("aoi {}: {defect}", aoi.id));
            continue;
        }
        let actual = aoi.boundary.area();
        if let Some(stored) = aoi.area {
            if ((stored - actual) / actual).abs() > AREA_REL_TOLERANCE {
                report.error(
                    "AREA_MISMATCH",
                    aoi.id.0,
                    format!("stored area {stored} differs from polygon area {actual}"),
                );
            }
        }
        for c in aoi.connections() {
            match roads.get(&c.road_id) {
                None => report.error(
                    "DANGLING_REF",
                    aoi.id.0,
                    format!("aoi {} connects to missing road {}", aoi.id, c.road_id),
                ),
                Some(road) if road.geometry.defect().is_none() => {
                    let d = road.geometry.distance_to(&c.point);
                    if d > CONNECTION_ON_ROAD_TOLERANCE {
                        report.error(
                            "CONNECTION_OFF_ROAD",
                            aoi.id.0,
                            format!("connection point is {d:.2} m from road {}", c.road_id),
                        );
                    }
                }
                Some(_) => {}
            }
        }
        if aoi.population > 0 && aoi.connections().is_empty() {
            report.error(
                "ISOLATED_AOI",
                aoi.id.0,
                format!("aoi {} has population {} but no road connection", aoi.id, aoi.population),
            );
        }
        for e in &aoi.enterprises {
            if e.average_wage < 0 {
                report.error("NEGATIVE_WAGE", aoi.id.0, format!("enterprise {} has negative wage", e.name));
            }
        }
    }

    for poi in &bundle.pois {
        if !poi.category.is_well_formed() {
            report.error(
                "BAD_CATEGORY",
                poi.id.0,
                format!("category '{}' is not a cate1.cate2.cate3 code", poi.category.0),
            );
        }
        match poi.aoi_id {
            None => report.error("DANGLING_REF", poi.id.0, format!("poi {} has no aoi", poi.id)),
            Some(aoi_id) => match aois.get(&aoi_id) {
                None => report.error(
                    "DANGLING_REF",
                    poi.id.0,
                    format!("poi {} references missing aoi {aoi_id}", poi.id),
                ),
                Some(aoi) if aoi.boundary.defect().is_none() => {
                    if !point_in_polygon(&poi.coordinate, &aoi.boundary)
                        && aoi.boundary.boundary_distance(&poi.coordinate) > POI_AOI_TOLERANCE
                    {
                        report.error(
                            "POI_OUTSIDE_AOI",
                            poi.id.0,
                            format!("poi {} lies outside aoi {aoi_id}", poi.id),
                        );
                    }
                }
                Some(_) => {}
            },
        }
    }

    let horizon = bundle.horizon_seconds();
    for person in &bundle.persons {
        if !aois.contains_key(&person.home) {
            report.error(
                "DANGLING_REF",
                person.id.0,
                format!("person {} home aoi {} missing", person.id, person.home),
            );
        }
        if let Some(w) = person.workplace.filter(|w| !aois.contains_key(w)) {
            report.error(
                "DANGLING_REF",
                person.id.0,
                format!("person {} workplace {w} missing", person.id),
            );
        }
        for t in &person.trips {
            let dest_ok = match t.end {
                Destination::Aoi(a) => aois.contains_key(&a),
                Destination::Poi(p) => pois.contains_key(&p),
            };
            if !dest_ok {
                report.error(
                    "DANGLING_REF",
                    person.id.0,
                    format!("person {} trip to missing {}", person.id, t.end),
                );
            }
            if t.depart_time < 0 || t.depart_time >= horizon {
                report.error(
                    "BAD_TRIP",
                    person.id.0,
                    format!("depart_time {} outside [0, {horizon})", t.depart_time),
                );
            }
            if t.mode == TravelMode::PublicTransport {
                report.warn(
                    "UNSUPPORTED_MODE",
                    person.id.0,
                    "public_transport trips fail at departure",
                );
            }
        }
        if !trips_strictly_increasing(person.trips.iter().map(|t| t.depart_time)) {
            report.error(
                "TRIP_ORDER",
                person.id.0,
                format!("person {} trips are not strictly increasing in depart_time", person.id),
            );
        }
        // declared origins should chain: trip k starts where trip k-1 ended
        let mut at = Destination::Aoi(person.home);
        for t in &person.trips {
            if let Some(start) = t.start {
                if !same_place(bundle, start, at) {
                    report.warn(
                        "START_MISMATCH",
                        person.id.0,
                        format!("trip declares start {start} but person is at {at}"),
                    );
                }
            }
            at = t.end;
        }
    }

    report
}

fn same_place(bundle: &MapBundle, a: Destination, b: Destination) -> bool {
    let resolve = |d: Destination| match d {
        Destination::Aoi(id) => Some(id),
        Destination::Poi(id) => bundle.poi(id).and_then(|p| p.aoi_id),
    };
    resolve(a) == resolve(b)
}

pub fn trips_strictly_increasing<I: IntoIterator<Item = i64>>(times: I) -> bool {
    let mut prev: Option<i64> = None;
    for t in times {
        if prev.is_some_and(|p| t <= p) {
            return false;
        }
        prev = Some(t);
    }
    true
}
