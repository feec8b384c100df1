//! Push triggers: the event record, the bounded global log and per-subscription queues.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PersonId;

pub const DEFAULT_RETENTION: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    EnterAoi,
    LeaveAoi,
    EnterRoad,
    LeaveRoad,
    TripStart,
    TripFinish,
}

impl Trigger {
    pub const ALL: [Trigger; 6] = [
        Trigger::EnterAoi,
        Trigger::LeaveAoi,
        Trigger::EnterRoad,
        Trigger::LeaveRoad,
        Trigger::TripStart,
        Trigger::TripFinish,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Trigger::EnterAoi => "enter_aoi",
            Trigger::LeaveAoi => "leave_aoi",
            Trigger::EnterRoad => "enter_road",
            Trigger::LeaveRoad => "leave_road",
            Trigger::TripStart => "trip_start",
            Trigger::TripFinish => "trip_finish",
        }
    }

    /// Kind of entity `target_id` refers to for this trigger.
    pub fn target_kind(&self) -> TargetKind {
        match self {
            Trigger::EnterAoi | Trigger::LeaveAoi => TargetKind::Aoi,
            Trigger::EnterRoad | Trigger::LeaveRoad => TargetKind::Road,
            Trigger::TripStart | Trigger::TripFinish => TargetKind::Person,
        }
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Trigger {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Trigger::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown trigger '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Aoi,
    Road,
    Person,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub step: u64,
    pub trigger: Trigger,
    pub person_id: PersonId,
    pub target_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<TripStatus>,
}

/// Event without sequence number, as produced by the mobility step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEvent {
    pub trigger: Trigger,
    pub person_id: PersonId,
    pub target_id: u64,
    pub status: Option<TripStatus>,
}

impl RawEvent {
    pub fn new(trigger: Trigger, person_id: PersonId, target_id: u64) -> Self {
        Self {
            trigger,
            person_id,
            target_id,
            status: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscription {
    pub sub_id: u64,
    pub trigger: Trigger,
    pub target_id: u64,
}

/// Result of draining a subscription.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Drain {
    pub events: Vec<Event>,
    /// Set when events newer than the requested cursor were already evicted.
    pub truncated: bool,
}

#[derive(Debug)]
struct SubQueue {
    sub: Subscription,
    events: VecDeque<Event>,
    /// Highest seq evicted from this queue, if any.
    evicted_through: Option<u64>,
}

#[derive(Debug)]
pub struct EventLog {
    retention: usize,
    next_seq: u64,
    log: VecDeque<Event>,
    subs: BTreeMap<u64, SubQueue>,
    by_key: HashMap<(Trigger, u64), Vec<u64>>,
    next_sub: u64,
    counts: BTreeMap<Trigger, u64>,
}

impl Default for EventLog {
    fn default() -> Self {
        Self::with_retention(DEFAULT_RETENTION)
    }
}

impl EventLog {
    pub fn with_retention(retention: usize) -> Self {
        Self {
            retention: retention.max(1),
            next_seq: 1,
            log: VecDeque::new(),
            subs: BTreeMap::new(),
            by_key: HashMap::new(),
            next_sub: 1,
            counts: BTreeMap::new(),
        }
    }

    pub fn emit(&mut self, step: u64, raw: RawEvent) -> u64 {
        let ev = Event {
            seq: self.next_seq,
            step,
            trigger: raw.trigger,
            person_id: raw.person_id,
            target_id: raw.target_id,
            status: raw.status,
        };
        self.next_seq += 1;
        *self.counts.entry(ev.trigger).or_default() += 1;
        if let Some(subs) = self.by_key.get(&(ev.trigger, ev.target_id)) {
            for id in subs {
                let q = self.subs.get_mut(id).expect("indexed subscription exists");
                if q.events.len() == self.retention {
                    let old = q.events.pop_front().expect("non-empty");
                    q.evicted_through = Some(old.seq);
                }
                q.events.push_back(ev.clone());
            }
        }
        if self.log.len() == self.retention {
            self.log.pop_front();
        }
        let seq = ev.seq;
        self.log.push_back(ev);
        seq
    }

    pub fn last_seq(&self) -> u64 {
        self.next_seq - 1
    }

    pub fn total(&self) -> u64 {
        self.last_seq()
    }

    pub fn count(&self, trigger: Trigger) -> u64 {
        self.counts.get(&trigger).copied().unwrap_or(0)
    }

    /// Retained events with seq greater than `since`.
    pub fn since(&self, since: u64) -> impl Iterator<Item = &Event> {
        let start = self.log.partition_point(|e| e.seq <= since);
        self.log.range(start..)
    }

    pub fn subscribe(&mut self, trigger: Trigger, target_id: u64) -> u64 {
        let sub_id = self.next_sub;
        self.next_sub += 1;
        self.subs.insert(
            sub_id,
            SubQueue {
                sub: Subscription {
                    sub_id,
                    trigger,
                    target_id,
                },
                events: VecDeque::new(),
                evicted_through: None,
            },
        );
        self.by_key.entry((trigger, target_id)).or_default().push(sub_id);
        sub_id
    }

    pub fn subscription(&self, sub_id: u64) -> Result<&Subscription> {
        self.subs
            .get(&sub_id)
            .map(|q| &q.sub)
            .ok_or(Error::UnknownSubscription(sub_id))
    }

    pub fn unsubscribe(&mut self, sub_id: u64) -> Result<()> {
        let q = self.subs.remove(&sub_id).ok_or(Error::UnknownSubscription(sub_id))?;
        if let Some(v) = self.by_key.get_mut(&(q.sub.trigger, q.sub.target_id)) {
            v.retain(|&s| s != sub_id);
        }
        Ok(())
    }

    /// Matching events with seq > `since_seq`, oldest first. Reading does not
    /// consume: the same cursor always yields the same answer.
    pub fn drain(&self, sub_id: u64, since_seq: u64) -> Result<Drain> {
        let q = self.subs.get(&sub_id).ok_or(Error::UnknownSubscription(sub_id))?;
        let start = q.events.partition_point(|e| e.seq <= since_seq);
        Ok(Drain {
            events: q.events.range(start..).cloned().collect(),
            truncated: q.evicted_through.is_some_and(|s| s > since_seq),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(trigger: Trigger, person: u64, target: u64) -> RawEvent {
        RawEvent::new(trigger, PersonId(person), target)
    }

    #[test]
    fn drain_is_filtered_and_idempotent() {
        let mut log = EventLog::default();
        let s = log.subscribe(Trigger::EnterAoi, 7);
        log.emit(0, ev(Trigger::EnterAoi, 1, 7));
        log.emit(0, ev(Trigger::EnterAoi, 2, 8));
        log.emit(1, ev(Trigger::LeaveAoi, 1, 7));
        log.emit(2, ev(Trigger::EnterAoi, 3, 7));
        let d = log.drain(s, 0).unwrap();
        assert_eq!(d.events.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(log.drain(s, 0).unwrap(), d);
        assert_eq!(log.drain(s, 1).unwrap().events.len(), 1);
        assert!(log.drain(s, 4).unwrap().events.is_empty());
        assert!(matches!(log.drain(99, 0), Err(Error::UnknownSubscription(99))));
    }

    #[test]
    fn retention_marks_truncation() {
        let mut log = EventLog::with_retention(3);
        let s = log.subscribe(Trigger::TripStart, 1);
        for _ in 0..5 {
            log.emit(0, ev(Trigger::TripStart, 1, 1));
        }
        let d = log.drain(s, 0).unwrap();
        assert!(d.truncated);
        assert_eq!(d.events.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![3, 4, 5]);
        assert!(!log.drain(s, 2).unwrap().truncated);
        assert_eq!(log.since(0).count(), 3);
    }

    #[test]
    fn trigger_names_round_trip() {
        for t in Trigger::ALL {
            assert_eq!(t.as_str().parse::<Trigger>().unwrap(), t);
        }
        assert!("teleport".parse::<Trigger>().is_err());
    }
}
