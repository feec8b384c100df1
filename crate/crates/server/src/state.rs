//! Shared server state: the engine behind one lock, the last published
//! snapshot, and the thread that drives the clock.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tokio::sync::watch;

use ugi_core::kernel::{AckOutcome, Engine};
use ugi_core::kg::KnowledgeGraph;
use ugi_core::model::{AoiId, PersonId, RoadId, Trip};
use ugi_core::nl::CityApi;
use ugi_core::snapshot::{AoiRuntime, PersonRuntime, RoadRuntime, Snapshot};
use ugi_core::{Error, Result};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    /// Advance without acks while no client is registered.
    pub free_run: bool,
    /// Free-run pace; 0 means as fast as possible.
    pub steps_per_second: f64,
    /// Free-running stops at this step.
    pub until_step: Option<u64>,
    /// How often the driver checks for evictions and closed barriers.
    pub poll_interval: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            free_run: false,
            steps_per_second: 0.0,
            until_step: None,
            poll_interval: Duration::from_millis(10),
        }
    }
}

pub struct Shared {
    engine: Mutex<Engine>,
    snapshot: RwLock<Arc<Snapshot>>,
    kg: KnowledgeGraph,
    step_tx: watch::Sender<u64>,
    config: ServeConfig,
    shutdown: AtomicBool,
}

impl Shared {
    pub fn new(engine: Engine, kg: KnowledgeGraph, config: ServeConfig) -> Arc<Self> {
        let snap = Arc::new(engine.snapshot());
        let (step_tx, _) = watch::channel(engine.step());
        Arc::new(Self {
            engine: Mutex::new(engine),
            snapshot: RwLock::new(snap),
            kg,
            step_tx,
            config,
            shutdown: AtomicBool::new(false),
        })
    }

    pub fn engine(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// The last closed step.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn kg(&self) -> &KnowledgeGraph {
        &self.kg
    }

    pub fn subscribe_steps(&self) -> watch::Receiver<u64> {
        self.step_tx.subscribe()
    }

    /// Called with the engine lock held so that snapshots publish in step order.
    fn publish(&self, engine: &Engine) {
        let snap = Arc::new(engine.snapshot());
        *self.snapshot.write().unwrap_or_else(|p| p.into_inner()) = snap;
        self.step_tx.send_replace(engine.step());
    }

    pub fn ack(&self, client: u64, step: u64) -> Result<AckOutcome> {
        let mut e = self.engine();
        let out = e.ack(client, step, Instant::now())?;
        if out.advanced {
            self.publish(&e);
        }
        Ok(out)
    }

    /// One driver iteration: evictions, a closed barrier, or a free-run step.
    pub fn drive_once(&self, now: Instant) -> bool {
        let mut e = self.engine();
        let advanced = if e.has_clients() {
            e.poll_barrier(now)
        } else if self.config.free_run && self.config.until_step.is_none_or(|u| e.step() < u) {
            e.advance();
            true
        } else {
            false
        };
        if advanced {
            self.publish(&e);
        }
        advanced
    }

    pub fn spawn_driver(self: &Arc<Self>) -> JoinHandle<()> {
        let shared = self.clone();
        std::thread::Builder::new()
            .name("ugi-driver".into())
            .spawn(move || {
                let pace = (shared.config.steps_per_second > 0.0)
                    .then(|| Duration::from_secs_f64(1.0 / shared.config.steps_per_second));
                while !shared.shutdown.load(Ordering::Relaxed) {
                    let advanced = shared.drive_once(Instant::now());
                    match (advanced, pace) {
                        (true, Some(p)) => std::thread::sleep(p),
                        (true, None) => {}
                        (false, _) => std::thread::sleep(shared.config.poll_interval),
                    }
                }
            })
            .expect("spawn driver thread")
    }

    pub fn stop(&self) {
        self.shutdown.store(true, Ordering::Relaxed);
    }

    pub fn stopped(&self) -> bool {
        self.shutdown.load(Ordering::Relaxed)
    }
}

impl CityApi for Shared {
    fn get_aoi(&self, id: AoiId) -> Result<AoiRuntime> {
        self.snapshot().aoi(id).cloned().ok_or(Error::UnknownId { kind: "AOI", id: id.0 })
    }

    fn get_road(&self, id: RoadId) -> Result<RoadRuntime> {
        self.snapshot().road(id).cloned().ok_or(Error::UnknownId { kind: "road", id: id.0 })
    }

    fn get_person(&self, id: PersonId) -> Result<PersonRuntime> {
        self.snapshot().person(id).cloned().ok_or(Error::UnknownId { kind: "person", id: id.0 })
    }

    fn set_trips(&self, id: PersonId, trips: Vec<Trip>) -> Result<()> {
        self.engine().submit_control(id, trips)
    }

    fn current_day(&self) -> i64 {
        self.engine().current_day()
    }
}
