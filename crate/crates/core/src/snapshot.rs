//! Read-only runtime views published after each closed step.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::model::{AoiId, LandUse, Money, PersonId, RoadId, Trip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CongestionLevel {
    Free,
    Slow,
    Congested,
    Jam,
}

/// Mean vehicle speed and the congestion class of its ratio to the limit.
/// An empty road reports the limit itself.
pub fn congestion_level(speeds: &[f64], speed_limit: f64) -> (f64, CongestionLevel) {
    if speeds.is_empty() {
        return (speed_limit, CongestionLevel::Free);
    }
    let avg = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let ratio = if speed_limit > 0.0 { avg / speed_limit } else { 0.0 };
    let level = if ratio > 0.7 {
        CongestionLevel::Free
    } else if ratio >= 0.4 {
        CongestionLevel::Slow
    } else if ratio >= 0.15 {
        CongestionLevel::Congested
    } else {
        CongestionLevel::Jam
    };
    (avg, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonStatus {
    IdleAtAoi,
    WaitingDepart,
    Traveling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    pub step: u64,
    pub time_of_day: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRuntime {
    pub id: AoiId,
    pub area_m2: f64,
    pub population: u64,
    pub land_use: LandUse,
    pub poi_count: usize,
    pub connected_roads: Vec<RoadId>,
    pub people: Vec<PersonId>,
    pub recent_entries: u64,
    pub recent_departures: u64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadRuntime {
    pub id: RoadId,
    pub length_m: f64,
    pub lane_count: u32,
    pub speed_limit: f64,
    pub vehicles: Vec<PersonId>,
    pub pedestrians: Vec<PersonId>,
    pub average_speed: f64,
    pub congestion_level: CongestionLevel,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRuntime {
    pub id: PersonId,
    pub coordinate: Point,
    pub speed: f64,
    pub direction: Point,
    pub current_trip: Option<Trip>,
    pub pending_trips: Vec<Trip>,
    pub balance: Money,
    pub status: PersonStatus,
    pub step: u64,
}

/// Everything the pull endpoints can see, frozen at one step.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub step: u64,
    pub time_of_day: i64,
    pub aois: Vec<AoiRuntime>,
    pub roads: Vec<RoadRuntime>,
    pub persons: Vec<PersonRuntime>,
    pub(crate) aoi_at: HashMap<AoiId, usize>,
    pub(crate) road_at: HashMap<RoadId, usize>,
    pub(crate) person_at: HashMap<PersonId, usize>,
}

impl Snapshot {
    pub fn new(
        step: u64,
        time_of_day: i64,
        aois: Vec<AoiRuntime>,
        roads: Vec<RoadRuntime>,
        persons: Vec<PersonRuntime>,
    ) -> Self {
        let aoi_at = aois.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        let road_at = roads.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        let person_at = persons.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        Self {
            step,
            time_of_day,
            aois,
            roads,
            persons,
            aoi_at,
            road_at,
            person_at,
        }
    }

    pub fn clock(&self) -> Clock {
        Clock {
            step: self.step,
            time_of_day: self.time_of_day,
        }
    }

    pub fn aoi(&self, id: AoiId) -> Option<&AoiRuntime> {
        self.aoi_at.get(&id).map(|&i| &self.aois[i])
    }

    pub fn road(&self, id: RoadId) -> Option<&RoadRuntime> {
        self.road_at.get(&id).map(|&i| &self.roads[i])
    }

    pub fn person(&self, id: PersonId) -> Option<&PersonRuntime> {
        self.person_at.get(&id).map(|&i| &self.persons[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn congestion_thresholds() {
        assert_eq!(congestion_level(&[], 15.0), (15.0, CongestionLevel::Free));
        assert_eq!(congestion_level(&[0.0, 0.0], 15.0), (0.0, CongestionLevel::Jam));
        assert_eq!(congestion_level(&[8.0], 10.0).1, CongestionLevel::Free);
        assert_eq!(congestion_level(&[7.0], 10.0).1, CongestionLevel::Slow);
        assert_eq!(congestion_level(&[4.0], 10.0).1, CongestionLevel::Slow);
        assert_eq!(congestion_level(&[2.0], 10.0).1, CongestionLevel::Congested);
        assert_eq!(congestion_level(&[1.0], 10.0).1, CongestionLevel::Jam);
    }

    #[test]
    fn mean_matches_naive_sum() {
        let speeds = [3.5, 12.25, 0.0, 7.0, 9.125];
        let mut total = 0.0;
        for s in speeds {
            total += s;
        }
        let (avg, _) = congestion_level(&speeds, 15.0);
        assert!((avg - total / 5.0).abs() < 1e-12);
    }
}
