//! The stepped engine: ack barrier, queued controls, mobility and flows per
//! step, push events and published snapshots.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::citymap::CityMap;
use crate::error::{Error, Result};
use crate::events::{Drain, Event, EventLog, TargetKind, Trigger, TripStatus, DEFAULT_RETENTION};
use crate::flows::{Account, EntryKind, Ledger, MessageBus, Rate, Recipients};
use crate::mobility::{FinishedTrip, MobilityParams, StepOutput, World};
use crate::model::{AoiId, Destination, MapBundle, Money, Person, PersonId, RoadId, TravelMode, Trip, SECONDS_PER_DAY};
use crate::snapshot::Snapshot;
use crate::validate::trips_strictly_increasing;

pub const DEFAULT_CLIENT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Seconds after midnight at step 0.
    pub start_time: i64,
    pub mobility: MobilityParams,
    pub tax_rate: Rate,
    pub pay_period_steps: u64,
    pub interest_rate: Rate,
    pub interest_period_steps: u64,
    pub event_retention: usize,
    pub client_timeout: Duration,
    /// Steps between per-road flow samples in the stats stream; 0 disables.
    pub flow_sample_interval: u64,
    pub record_stats: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            start_time: 0,
            mobility: MobilityParams::default(),
            tax_rate: Rate::ZERO,
            pay_period_steps: SECONDS_PER_DAY as u64 * 30,
            interest_rate: Rate::ZERO,
            interest_period_steps: SECONDS_PER_DAY as u64,
            event_retention: DEFAULT_RETENTION,
            client_timeout: DEFAULT_CLIENT_TIMEOUT,
            flow_sample_interval: 300,
            record_stats: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClientInfo {
    pub client_id: u64,
    pub name: String,
    pub last_acked_step: Option<u64>,
    pub timeout_seconds: f64,
}

#[derive(Debug, Clone)]
struct ClientState {
    name: String,
    timeout: Duration,
    last_seen: Instant,
    acked: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AckOutcome {
    pub advanced: bool,
    pub new_step: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub consumption: Money,
    pub wages: Money,
    pub taxes: Money,
    pub interest: Money,
    pub balance_total: i128,
    pub persons_negative: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: u64,
    pub trips_completed: u64,
    pub trips_failed: u64,
    pub events: u64,
    pub events_by_trigger: BTreeMap<String, u64>,
    pub messages_delivered: u64,
    pub ledger: LedgerTotals,
}

/// One line of the stats stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub kind: String,
    pub step: u64,
    pub payload: Value,
}

pub fn write_ndjson<W: Write>(mut w: W, records: &[StatsRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct Engine {
    map: Arc<CityMap>,
    config: EngineConfig,
    world: World,
    ledger: Ledger,
    bus: MessageBus,
    employment: Vec<(PersonId, Account, Money)>,
    step: u64,
    clients: BTreeMap<u64, ClientState>,
    next_client: u64,
    barrier_opened: Instant,
    controls: Vec<(usize, Vec<Trip>)>,
    events: EventLog,
    out: StepOutput,
    trips_completed: u64,
    trips_failed: u64,
    stats: Vec<StatsRecord>,
    ledger_cursor: usize,
    warnings: Vec<String>,
}

impl Engine {
    pub fn new(map: Arc<CityMap>, persons: &[Person], config: EngineConfig) -> Result<Self> {
        if config.pay_period_steps == 0 || config.interest_period_steps == 0 {
            return Err(Error::BadConfig("periods must be at least one step".into()));
        }
        let world = World::new(map.clone(), persons, config.mobility.clone())?;
        let mut opening: Vec<(Account, Money)> = persons.iter().map(|p| (Account::Person(p.id), p.balance)).collect();
        for a in &map.bundle.aois {
            for (i, e) in a.enterprises.iter().enumerate() {
                opening.push((Account::Enterprise(a.id, i as u32), e.registered_capital));
            }
        }
        let mut employment: Vec<(PersonId, Account, Money)> = persons
            .iter()
            .filter(|p| p.wage > 0)
            .filter_map(|p| {
                let aoi = p.workplace?;
                Some((p.id, employer_account(&map, aoi), p.wage))
            })
            .collect();
        employment.sort_by_key(|e| e.0);
        Ok(Self {
            events: EventLog::with_retention(config.event_retention),
            map,
            world,
            ledger: Ledger::new(opening),
            bus: MessageBus::default(),
            employment,
            step: 0,
            clients: BTreeMap::new(),
            next_client: 1,
            barrier_opened: Instant::now(),
            controls: Vec::new(),
            out: StepOutput::default(),
            trips_completed: 0,
            trips_failed: 0,
            stats: Vec::new(),
            ledger_cursor: 0,
            warnings: Vec::new(),
            config,
        })
    }

    /// Engine over a bundle's own persons.
    pub fn from_bundle(bundle: MapBundle, config: EngineConfig) -> Result<Self> {
        let persons = bundle.persons.clone();
        Self::new(Arc::new(CityMap::new(bundle)), &persons, config)
    }

    pub fn map(&self) -> &Arc<CityMap> {
        &self.map
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn messages(&self) -> &MessageBus {
        &self.bus
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Absolute simulation time (seconds) of the current step.
    pub fn sim_time(&self) -> i64 {
        self.config.start_time + self.step as i64
    }

    pub fn time_of_day(&self) -> i64 {
        self.sim_time().rem_euclid(SECONDS_PER_DAY)
    }

    /// Whole days elapsed since simulation midnight.
    pub fn current_day(&self) -> i64 {
        self.sim_time().div_euclid(SECONDS_PER_DAY)
    }

    // ---- barrier ----

    pub fn register_client(&mut self, name: &str, timeout: Option<Duration>, now: Instant) -> u64 {
        let id = self.next_client;
        self.next_client += 1;
        self.clients.insert(
            id,
            ClientState {
                name: name.to_string(),
                timeout: timeout.unwrap_or(self.config.client_timeout),
                last_seen: now,
                acked: None,
            },
        );
        id
    }

    pub fn unregister_client(&mut self, id: u64) -> Result<()> {
        self.clients.remove(&id).map(|_| ()).ok_or(Error::UnknownClient(id))
    }

    pub fn clients(&self) -> Vec<ClientInfo> {
        self.clients
            .iter()
            .map(|(&id, c)| ClientInfo {
                client_id: id,
                name: c.name.clone(),
                last_acked_step: c.acked,
                timeout_seconds: c.timeout.as_secs_f64(),
            })
            .collect()
    }

    pub fn has_clients(&self) -> bool {
        !self.clients.is_empty()
    }

    fn barrier_closed(&self) -> bool {
        !self.clients.is_empty() && self.clients.values().all(|c| c.acked == Some(self.step))
    }

    /// Removes clients that have not acked the current step within their
    /// timeout. Returns the evicted ids.
    pub fn evict_expired(&mut self, now: Instant) -> Vec<u64> {
        let step = self.step;
        let opened = self.barrier_opened;
        let expired: Vec<u64> = self
            .clients
            .iter()
            .filter(|(_, c)| c.acked != Some(step) && now.saturating_duration_since(c.last_seen.max(opened)) > c.timeout)
            .map(|(&id, _)| id)
            .collect();
        for id in &expired {
            let c = self.clients.remove(id).expect("listed client exists");
            let msg = format!("client {id} ({}) evicted at step {step} after {:?} without ack", c.name, c.timeout);
            tracing::warn!("{msg}");
            self.warnings.push(msg);
        }
        expired
    }

    /// Evicts timed-out clients and advances if the rest have all acked.
    pub fn poll_barrier(&mut self, now: Instant) -> bool {
        self.evict_expired(now);
        if self.barrier_closed() {
            self.advance_at(now);
            true
        } else {
            false
        }
    }

    pub fn ack(&mut self, client: u64, step: u64, now: Instant) -> Result<AckOutcome> {
        self.evict_expired(now);
        let current = self.step;
        let c = self.clients.get_mut(&client).ok_or(Error::UnknownClient(client))?;
        if step != current {
            return Err(Error::StaleStep { got: step, current });
        }
        c.acked = Some(step);
        c.last_seen = now;
        let advanced = self.barrier_closed();
        if advanced {
            self.advance_at(now);
        }
        Ok(AckOutcome {
            advanced,
            new_step: self.step,
        })
    }

    // ---- controls, messages, subscriptions ----

    fn check_trips(&self, trips: &[Trip]) -> Result<()> {
        if !trips_strictly_increasing(trips.iter().map(|t| t.depart_time)) {
            return Err(Error::InvalidTrips("depart times must be strictly increasing".into()));
        }
        let now = self.sim_time();
        for t in trips {
            if t.depart_time < now {
                return Err(Error::InvalidTrips(format!(
                    "depart time {} is before the current time {now}",
                    t.depart_time
                )));
            }
            if t.mode == TravelMode::PublicTransport {
                return Err(Error::UnsupportedMode("public_transport"));
            }
            if self.map.destination_aoi(t.end).is_err() {
                let (kind, id) = match t.end {
                    Destination::Aoi(a) => ("AOI", a.0),
                    Destination::Poi(p) => ("POI", p.0),
                };
                return Err(Error::InvalidTrips(format!("destination {kind} {id} does not exist")));
            }
        }
        Ok(())
    }

    /// Queues a replacement of the person's pending trips for the next step.
    pub fn submit_control(&mut self, person: PersonId, trips: Vec<Trip>) -> Result<()> {
        let pi = self.world.person_index(person)?;
        self.check_trips(&trips)?;
        self.controls.push((pi, trips));
        Ok(())
    }

    pub fn queue_message(&mut self, sender: PersonId, targets: Recipients, content: String) -> Result<u64> {
        self.world.person_index(sender)?;
        self.bus.queue(sender, targets, content, self.step)
    }

    pub fn subscribe(&mut self, trigger: Trigger, target_id: u64) -> Result<u64> {
        match trigger.target_kind() {
            TargetKind::Aoi => {
                self.map.aoi_index(AoiId(target_id))?;
            }
            TargetKind::Road => {
                self.map.road_index(RoadId(target_id))?;
            }
            TargetKind::Person => {
                self.world.person_index(PersonId(target_id))?;
            }
        }
        Ok(self.events.subscribe(trigger, target_id))
    }

    pub fn unsubscribe(&mut self, sub_id: u64) -> Result<()> {
        self.events.unsubscribe(sub_id)
    }

    pub fn drain_events(&self, sub_id: u64, since_seq: u64) -> Result<Drain> {
        self.events.drain(sub_id, since_seq)
    }

    pub fn events_since(&self, since_seq: u64) -> Vec<Event> {
        self.events.since(since_seq).cloned().collect()
    }

    // ---- stepping ----

    /// Advances one step regardless of the barrier.
    pub fn advance(&mut self) {
        self.advance_at(Instant::now());
    }

    fn advance_at(&mut self, now: Instant) {
        let t = self.step;
        let sim_now = self.sim_time();
        for (pi, trips) in std::mem::take(&mut self.controls) {
            self.world.set_pending(pi, trips);
        }
        let mut out = std::mem::take(&mut self.out);
        out.clear();
        self.world.advance(sim_now, t, &mut out);
        out.net_transitions();
        for raw in &out.events {
            self.events.emit(t, *raw);
        }
        for f in &out.finished {
            self.on_trip_finished(t, f);
        }
        self.out = out;

        let closing = t + 1;
        if closing % self.config.pay_period_steps == 0 {
            for &(person, employer, wage) in &self.employment {
                self.ledger.pay_wage(t, person, employer, wage, self.config.tax_rate);
            }
        }
        if closing % self.config.interest_period_steps == 0 {
            self.ledger.apply_interest(t, self.config.interest_rate);
        }
        if self.bus.pending() > 0 {
            let kin = self.world.kinematics();
            let positions: Vec<_> = kin
                .iter()
                .enumerate()
                .map(|(i, k)| (self.world.person_id(i), k.0))
                .collect();
            self.bus.deliver(closing, &positions);
        }
        if self.config.record_stats {
            self.record_step_stats(t);
        }
        self.step = closing;
        self.barrier_opened = now;
    }

    fn on_trip_finished(&mut self, t: u64, f: &FinishedTrip) {
        match f.status {
            TripStatus::Ok => self.trips_completed += 1,
            TripStatus::Failed => self.trips_failed += 1,
        }
        if f.status == TripStatus::Ok {
            if let Destination::Poi(poi_id) = f.trip.end {
                if let Ok(pi) = self.map.poi_index(poi_id) {
                    let poi = &self.map.bundle.pois[pi];
                    if let Some(ai) = poi.aoi_id.and_then(|a| self.map.aoi_index(a).ok()) {
                        let aoi = &self.map.bundle.aois[ai];
                        let amount = aoi.consumption.get(poi.category.cate1()).copied().unwrap_or(0);
                        let payee = employer_account(&self.map, aoi.id);
                        self.ledger.apply_consumption(t, f.person_id, payee, amount);
                    }
                }
            }
        }
        if self.config.record_stats {
            self.stats.push(StatsRecord {
                kind: "trip".into(),
                step: t,
                payload: json!({
                    "person": f.person_id,
                    "end": f.trip.end,
                    "mode": f.trip.mode,
                    "status": f.status,
                    "depart_time": f.depart_time,
                    "finish_time": f.finish_time,
                    "length_m": f.length,
                }),
            });
        }
    }

    fn record_step_stats(&mut self, t: u64) {
        for e in &self.ledger.entries()[self.ledger_cursor..] {
            let mut payload = serde_json::to_value(e).expect("ledger entry serializes");
            if let Account::Person(_) = e.debit {
                payload["debit_balance_after"] = json!(self.ledger.balance(e.debit));
            }
            self.stats.push(StatsRecord {
                kind: "ledger".into(),
                step: e.step,
                payload,
            });
        }
        self.ledger_cursor = self.ledger.entries().len();
        let every = self.config.flow_sample_interval;
        if every > 0 && t % every == 0 {
            for r in 0..self.map.bundle.roads.len() {
                let (vehicles, pedestrians) = self.world.road_occupancy(r);
                if vehicles + pedestrians == 0 {
                    continue;
                }
                let rt = self.world.road_runtime(r, t);
                self.stats.push(StatsRecord {
                    kind: "road_flow".into(),
                    step: t,
                    payload: json!({
                        "road": rt.id,
                        "vehicles": vehicles,
                        "pedestrians": pedestrians,
                        "average_speed": rt.average_speed,
                        "congestion_level": rt.congestion_level,
                    }),
                });
            }
        }
    }

    /// Buffered stats records since the last call.
    pub fn take_stats(&mut self) -> Vec<StatsRecord> {
        std::mem::take(&mut self.stats)
    }

    /// Free-runs to `until_step` when no clients are registered.
    pub fn run(&mut self, until_step: u64) -> RunSummary {
        if self.clients.is_empty() {
            while self.step < until_step {
                self.advance();
            }
        }
        self.summary()
    }

    pub fn summary(&self) -> RunSummary {
        let mut totals = LedgerTotals::default();
        for e in self.ledger.entries() {
            match e.kind {
                EntryKind::Consumption => totals.consumption += e.amount,
                EntryKind::Wage => totals.wages += e.amount,
                EntryKind::Tax => totals.taxes += e.amount,
                EntryKind::Interest => totals.interest += e.amount,
            }
        }
        totals.balance_total = self.ledger.total();
        totals.persons_negative = self
            .ledger
            .balances()
            .iter()
            .filter(|(a, &b)| matches!(a, Account::Person(_)) && b < 0)
            .count();
        RunSummary {
            steps: self.step,
            trips_completed: self.trips_completed,
            trips_failed: self.trips_failed,
            events: self.events.total(),
            events_by_trigger: Trigger::ALL
                .iter()
                .map(|t| (t.as_str().to_string(), self.events.count(*t)))
                .collect(),
            messages_delivered: self.bus.delivered(),
            ledger: totals,
        }
    }

    /// Runtime views of the current (last closed) step.
    pub fn snapshot(&self) -> Snapshot {
        let step = self.step;
        let kin = self.world.kinematics();
        let persons = kin
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let balance = self.ledger.balance(Account::Person(self.world.person_id(i)));
                self.world.person_runtime(i, k, balance, step)
            })
            .collect();
        let aois = (0..self.map.bundle.aois.len()).map(|a| self.world.aoi_runtime(a, step)).collect();
        let roads = (0..self.map.bundle.roads.len()).map(|r| self.world.road_runtime(r, step)).collect();
        Snapshot::new(step, self.time_of_day(), aois, roads, persons)
    }

    /// People currently inside each AOI, by id.
    pub fn aoi_occupants(&self) -> HashMap<AoiId, Vec<PersonId>> {
        self.map
            .bundle
            .aois
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id, self.world.aoi_people(i).collect()))
            .collect()
    }
}

/// First enterprise of the AOI, or GOVERNMENT when it has none.
fn employer_account(map: &CityMap, aoi: AoiId) -> Account {
    match map.aoi_index(aoi) {
        Ok(i) if !map.bundle.aois[i].enterprises.is_empty() => Account::Enterprise(aoi, 0),
        _ => Account::Government,
    }
}
