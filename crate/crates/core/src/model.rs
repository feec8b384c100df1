//! Map entities as they appear in the map file.
//!
//! Every struct keeps unrecognised JSON members in `extra` so that a load/save
//! cycle does not lose data written by other tools.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::geometry::{Point, Polygon, Polyline};

/// Integer minor currency units (cents).
pub type Money = i64;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Upper bound on sane road speed limits, m/s.
pub const MAX_SPEED_LIMIT: f64 = 42.0;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(RoadId);
id_type!(JunctionId);
id_type!(AoiId);
id_type!(PoiId);
id_type!(PersonId);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinate_epoch: Option<String>,
    /// District name used for AOI `belongTo` relations in the knowledge graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub district: Option<String>,
    /// Number of simulated days covered by the trip schedules.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub horizon_days: u32,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: RoadId,
    pub geometry: Polyline,
    pub lane_count: u32,
    pub speed_limit: f64,
    pub walkable: bool,
    pub drivable: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Road {
    pub fn length(&self) -> f64 {
        self.geometry.length()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnType {
    Left,
    Right,
    Straight,
    Uturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Movement {
    pub from_road: RoadId,
    pub to_road: RoadId,
    pub turn_type: TurnType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPhase {
    /// Movements with right of way, as `[from_road, to_road]` pairs.
    pub green: Vec<(RoadId, RoadId)>,
    pub duration: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub id: JunctionId,
    pub road_ids: Vec<RoadId>,
    #[serde(default)]
    pub movements: Vec<Movement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_phases: Option<Vec<SignalPhase>>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Junction {
    /// Whether `from -> to` currently has right of way. Junctions without
    /// phases never restrict; phased junctions run a fixed-time cycle.
    pub fn is_green(&self, from: RoadId, to: RoadId, time: i64) -> bool {
        let Some(phases) = self.signal_phases.as_ref().filter(|p| !p.is_empty()) else {
            return true;
        };
        let cycle: i64 = phases.iter().map(|p| p.duration as i64).sum();
        if cycle <= 0 {
            return true;
        }
        let mut t = time.rem_euclid(cycle);
        for phase in phases {
            if t < phase.duration as i64 {
                return phase.green.contains(&(from, to));
            }
            t -= phase.duration as i64;
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandUse {
    Residential,
    Commercial,
    Industrial,
    PublicService,
    Other,
}

impl LandUse {
    pub const ALL: [LandUse; 5] = [
        LandUse::Residential,
        LandUse::Commercial,
        LandUse::Industrial,
        LandUse::PublicService,
        LandUse::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LandUse::Residential => "residential",
            LandUse::Commercial => "commercial",
            LandUse::Industrial => "industrial",
            LandUse::PublicService => "public_service",
            LandUse::Other => "other",
        }
    }

    /// Human wording, e.g. "commercial land".
    pub fn phrase(&self) -> &'static str {
        match self {
            LandUse::Residential => "residential land",
            LandUse::Commercial => "commercial land",
            LandUse::Industrial => "industrial land",
            LandUse::PublicService => "public service land",
            LandUse::Other => "other land",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub road_id: RoadId,
    pub point: Point,
    pub walk_allowed: bool,
    pub drive_allowed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enterprise {
    pub name: String,
    pub category: String,
    pub registered_capital: Money,
    pub employee_count: u32,
    pub average_wage: Money,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub id: AoiId,
    pub boundary: Polygon,
    pub land_use: LandUse,
    #[serde(default)]
    pub population: u64,
    /// Computed from nearby roads at load time when absent.
    #[serde(default)]
    pub connections: Option<Vec<Connection>>,
    #[serde(default)]
    pub enterprises: Vec<Enterprise>,
    /// Per-visit spend keyed by top-level POI category.
    #[serde(default)]
    pub consumption: BTreeMap<String, Money>,
    #[serde(default)]
    pub rent: Money,
    /// Cached boundary area in square meters; filled at load time when absent.
    #[serde(default)]
    pub area: Option<f64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Aoi {
    pub fn connections(&self) -> &[Connection] {
        self.connections.as_deref().unwrap_or(&[])
    }

    pub fn area(&self) -> f64 {
        self.area.unwrap_or_else(|| self.boundary.area())
    }

    /// Sorted, de-duplicated ids of roads this AOI connects to.
    pub fn connected_roads(&self) -> Vec<RoadId> {
        let mut ids: Vec<RoadId> = self.connections().iter().map(|c| c.road_id).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// A three-level category code, `cate1.cate2.cate3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Category(pub String);

impl Category {
    fn parts(&self) -> Vec<&str> {
        self.0.split('.').collect()
    }

    pub fn is_well_formed(&self) -> bool {
        let parts = self.parts();
        parts.len() == 3 && parts.iter().all(|p| !p.is_empty())
    }

    pub fn cate1(&self) -> &str {
        self.0.split('.').next().unwrap_or("")
    }

    /// Prefix up to and including the `level`th component (1-based).
    pub fn prefix(&self, level: usize) -> String {
        self.parts()
            .into_iter()
            .take(level)
            .collect::<Vec<_>>()
            .join(".")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: PoiId,
    pub coordinate: Point,
    pub name: String,
    pub category: Category,
    /// Filled by containment matching at load time when absent.
    #[serde(default)]
    pub aoi_id: Option<AoiId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelMode {
    Drive,
    Walk,
    Bike,
    PublicTransport,
}

impl TravelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TravelMode::Drive => "drive",
            TravelMode::Walk => "walk",
            TravelMode::Bike => "bike",
            TravelMode::PublicTransport => "public_transport",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    Aoi(AoiId),
    Poi(PoiId),
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Aoi(id) => write!(f, "AOI {id}"),
            Destination::Poi(id) => write!(f, "POI {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub end: Destination,
    /// Seconds since simulation midnight of day 0.
    pub depart_time: i64,
    pub mode: TravelMode,
    /// Informational origin; the engine always departs from the current location.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Destination>,
}

impl Trip {
    pub fn new(end: Destination, depart_time: i64, mode: TravelMode) -> Self {
        Self {
            end,
            depart_time,
            mode,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: PersonId,
    pub home: AoiId,
    #[serde(default)]
    pub trips: Vec<Trip>,
    #[serde(default)]
    pub persona: BTreeMap<String, String>,
    #[serde(default)]
    pub balance: Money,
    #[serde(default)]
    pub wage: Money,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workplace: Option<AoiId>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Person {
    pub fn new(id: PersonId, home: AoiId) -> Self {
        Self {
            id,
            home,
            trips: Vec::new(),
            persona: BTreeMap::new(),
            balance: 0,
            wage: 0,
            workplace: None,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapBundle {
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default)]
    pub roads: Vec<Road>,
    #[serde(default)]
    pub junctions: Vec<Junction>,
    #[serde(default)]
    pub aois: Vec<Aoi>,
    #[serde(default)]
    pub pois: Vec<Poi>,
    #[serde(default)]
    pub persons: Vec<Person>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl MapBundle {
    pub fn road(&self, id: RoadId) -> Option<&Road> {
        self.roads.iter().find(|r| r.id == id)
    }

    pub fn aoi(&self, id: AoiId) -> Option<&Aoi> {
        self.aois.iter().find(|a| a.id == id)
    }

    pub fn poi(&self, id: PoiId) -> Option<&Poi> {
        self.pois.iter().find(|p| p.id == id)
    }

    pub fn horizon_seconds(&self) -> i64 {
        self.metadata.horizon_days.max(1) as i64 * SECONDS_PER_DAY
    }
}

/// Formats seconds-of-day as `HH:MM`.
pub fn format_hhmm(seconds: i64) -> String {
    let s = seconds.rem_euclid(SECONDS_PER_DAY);
    format!("{:02}:{:02}", s / 3600, (s % 3600) / 60)
}
