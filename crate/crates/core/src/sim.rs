//! Deterministic discrete-event simulation kernel: event calendar, entity
//! lifecycle through stations and transfers, FIFO resource queues, and
//! replication control with independent random streams.
//!
//! A single replication is strictly sequential. Replications are
//! independent and may run concurrently; the final set of results is
//! independent of execution interleaving.

use crate::energy::{ActivityRecord, TimeClass};
use crate::line::{Dist, LineConfig, ValueClass};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use thiserror::Error;

/// Simulation clock value in minutes. Non-negative, finite, monotonically
/// non-decreasing within a replication.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn from_minutes(min: f64) -> Self {
        debug_assert!(min >= 0.0 && min.is_finite());
        SimTime(min)
    }

    pub fn minutes(self) -> f64 {
        self.0
    }

    pub fn hours(self) -> f64 {
        self.0 / 60.0
    }

    pub fn plus(self, minutes: f64) -> Self {
        SimTime(self.0 + minutes)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event at t={event} scheduled in the past (clock t={clock})")]
    SchedulingInPast { event: f64, clock: f64 },
    #[error("simulation stalled at t={clock} with {in_flight} entities in flight")]
    StalledSimulation { clock: f64, in_flight: usize },
    #[error("config is invalid: {0}")]
    InvalidConfig(String),
    #[error("replication {index}: {source}")]
    Replication {
        index: u64,
        #[source]
        source: Box<SimError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    ArrivalAtStation { entity: usize, station: usize },
    ServiceStart { entity: usize, station: usize },
    ServiceEnd { entity: usize, station: usize },
    TransferStart { entity: usize, link: usize },
    TransferEnd { entity: usize, link: usize },
    ReplicationEnd,
}

/// Calendar entry, totally ordered by (time, sequence).
#[derive(Debug, Clone)]
pub struct Event {
    pub time: SimTime,
    pub sequence: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.sequence == other.sequence && self.time == other.time
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .minutes()
            .total_cmp(&other.time.minutes())
            .then(self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future event list. Pops in (time, insertion sequence) order; ties break
/// by insertion order for reproducibility.
#[derive(Debug, Default)]
pub struct Calendar {
    heap: BinaryHeap<std::cmp::Reverse<Event>>,
    next_sequence: u64,
    clock: SimTime,
}

impl Calendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<(), SimError> {
        if time < self.clock {
            return Err(SimError::SchedulingInPast {
                event: time.minutes(),
                clock: self.clock.minutes(),
            });
        }
        let event = Event { time, sequence: self.next_sequence, kind };
        self.next_sequence += 1;
        self.heap.push(std::cmp::Reverse(event));
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Event> {
        let event = self.heap.pop()?.0;
        self.clock = event.time;
        Some(event)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Reproducible per-replication random stream: distinct replication
/// indices select distinct sub-streams of one root generator.
#[derive(Debug, Clone)]
pub struct RandomStream {
    base_seed: u64,
    replication_index: u64,
    draw_count: u64,
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(base_seed: u64, replication_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
        rng.set_stream(replication_index);
        Self { base_seed, replication_index, draw_count: 0, rng }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn replication_index(&self) -> u64 {
        self.replication_index
    }

    pub fn draw_count(&self) -> u64 {
        self.draw_count
    }

    pub fn sample(&mut self, dist: &Dist) -> f64 {
        self.draw_count += 1;
        dist.sample(&mut self.rng)
    }
}

/// A batch that completed the line within the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedEntity {
    pub id: u64,
    pub created_at: SimTime,
    pub completed_at: SimTime,
    pub va_min: f64,
    pub nva_min: f64,
    pub wait_min: f64,
    pub transfer_min: f64,
    pub records: Vec<ActivityRecord>,
}

impl CompletedEntity {
    pub fn flow_time_min(&self) -> f64 {
        self.completed_at.minutes() - self.created_at.minutes()
    }
}

/// Per-station occupancy summary for one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTrace {
    pub station_id: String,
    pub busy_min: f64,
    pub wait_total_min: f64,
    pub served: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication_index: u64,
    pub completed: Vec<CompletedEntity>,
    pub in_flight: usize,
    pub stations: Vec<StationTrace>,
    pub span: SimTime,
}

struct EntityState {
    id: u64,
    created_at: SimTime,
    completed_at: Option<SimTime>,
    queued_since: Option<SimTime>,
    service_started: Option<SimTime>,
    va_min: f64,
    nva_min: f64,
    wait_min: f64,
    transfer_min: f64,
    records: Vec<ActivityRecord>,
}

struct StationState {
    free_servers: u32,
    queue: VecDeque<usize>,
    busy_min: f64,
    wait_total_min: f64,
    served: u64,
    effective_service: Dist,
}

/// Run one replication of `config` until `horizon` (minutes). Deterministic
/// given (config, stream, horizon).
pub fn run_replication(
    config: &LineConfig,
    mut stream: RandomStream,
    horizon: SimTime,
) -> Result<ReplicationResult, SimError> {
    let violations = crate::line::validate(config);
    if !violations.is_empty() {
        return Err(SimError::InvalidConfig(violations[0].to_string()));
    }
    if horizon.minutes() <= 0.0 {
        return Err(SimError::InvalidConfig("horizon must be > 0".into()));
    }

    let replication_index = stream.replication_index();
    let last_station = config.stations.len() - 1;
    let mut calendar = Calendar::new();
    let mut stations: Vec<StationState> = config
        .stations
        .iter()
        .map(|s| StationState {
            free_servers: s.servers,
            queue: VecDeque::new(),
            busy_min: 0.0,
            wait_total_min: 0.0,
            served: 0,
            effective_service: s.effective_service(config.batch_size),
        })
        .collect();

    let mut entities: Vec<EntityState> = Vec::new();
    calendar.schedule(horizon, EventKind::ReplicationEnd)?;
    for (id, release_min) in config.release_times().into_iter().enumerate() {
        entities.push(EntityState {
            id: id as u64,
            created_at: SimTime::from_minutes(release_min),
            completed_at: None,
            queued_since: None,
            service_started: None,
            va_min: 0.0,
            nva_min: 0.0,
            wait_min: 0.0,
            transfer_min: 0.0,
            records: Vec::new(),
        });
        calendar.schedule(
            SimTime::from_minutes(release_min),
            EventKind::ArrivalAtStation { entity: id, station: 0 },
        )?;
    }

    let mut completed: Vec<CompletedEntity> = Vec::new();
    let mut last_activity = SimTime::ZERO;

    // Reserve a server for the queue head, if any, and schedule its start.
    fn dispatch(
        station: usize,
        states: &mut [StationState],
        calendar: &mut Calendar,
    ) -> Result<(), SimError> {
        let now = calendar.clock();
        while states[station].free_servers > 0 {
            let Some(entity) = states[station].queue.pop_front() else { break };
            states[station].free_servers -= 1;
            calendar.schedule(now, EventKind::ServiceStart { entity, station })?;
        }
        Ok(())
    }

    loop {
        let Some(event) = calendar.pop() else {
            let in_flight = entities.iter().filter(|e| e.completed_at.is_none()).count();
            return Err(SimError::StalledSimulation {
                clock: calendar.clock().minutes(),
                in_flight,
            });
        };
        let now = event.time;
        match event.kind {
            EventKind::ReplicationEnd => break,
            EventKind::ArrivalAtStation { entity, station } => {
                last_activity = now;
                entities[entity].queued_since = Some(now);
                stations[station].queue.push_back(entity);
                dispatch(station, &mut stations, &mut calendar)?;
            }
            EventKind::ServiceStart { entity, station } => {
                last_activity = now;
                let queued_since = entities[entity]
                    .queued_since
                    .take()
                    .expect("service start implies a prior arrival");
                let wait = now.minutes() - queued_since.minutes();
                if wait > 0.0 {
                    let record = ActivityRecord::new(
                        entities[entity].id,
                        config.stations[station].id.clone(),
                        TimeClass::Wait,
                        queued_since,
                        now,
                        config.stations[station].power_idle_kw,
                    )
                    .expect("wait episode is forward in time");
                    entities[entity].wait_min += wait;
                    entities[entity].records.push(record);
                }
                stations[station].wait_total_min += wait;
                entities[entity].service_started = Some(now);
                let duration = stream.sample(&stations[station].effective_service);
                calendar.schedule(now.plus(duration), EventKind::ServiceEnd { entity, station })?;
            }
            EventKind::ServiceEnd { entity, station } => {
                last_activity = now;
                let started = entities[entity]
                    .service_started
                    .take()
                    .expect("service end implies a prior start");
                let duration = now.minutes() - started.minutes();
                let class = match config.stations[station].value_class {
                    ValueClass::VA => TimeClass::VA,
                    ValueClass::NVA => TimeClass::NVA,
                };
                let record = ActivityRecord::new(
                    entities[entity].id,
                    config.stations[station].id.clone(),
                    class,
                    started,
                    now,
                    config.stations[station].power_active_kw,
                )
                .expect("service episode is forward in time");
                match class {
                    TimeClass::VA => entities[entity].va_min += duration,
                    _ => entities[entity].nva_min += duration,
                }
                entities[entity].records.push(record);
                stations[station].busy_min += duration;
                stations[station].served += 1;
                stations[station].free_servers += 1;
                dispatch(station, &mut stations, &mut calendar)?;

                if station == last_station {
                    let e = &mut entities[entity];
                    e.completed_at = Some(now);
                    completed.push(CompletedEntity {
                        id: e.id,
                        created_at: e.created_at,
                        completed_at: now,
                        va_min: e.va_min,
                        nva_min: e.nva_min,
                        wait_min: e.wait_min,
                        transfer_min: e.transfer_min,
                        records: std::mem::take(&mut e.records),
                    });
                } else {
                    calendar.schedule(now, EventKind::TransferStart { entity, link: station })?;
                }
            }
            EventKind::TransferStart { entity, link } => {
                last_activity = now;
                let transfer = &config.transfers[link];
                let duration = stream.sample(&transfer.duration_min);
                let end = now.plus(duration);
                let record = ActivityRecord::new(
                    entities[entity].id,
                    transfer.link_id(),
                    TimeClass::Transfer,
                    now,
                    end,
                    transfer.power_kw,
                )
                .expect("transfer episode is forward in time");
                entities[entity].transfer_min += duration;
                entities[entity].records.push(record);
                calendar.schedule(end, EventKind::TransferEnd { entity, link })?;
            }
            EventKind::TransferEnd { entity, link } => {
                last_activity = now;
                calendar.schedule(now, EventKind::ArrivalAtStation { entity, station: link + 1 })?;
            }
        }
    }

    let in_flight = entities.iter().filter(|e| e.completed_at.is_none()).count();
    let span = if last_activity < horizon { last_activity } else { horizon };
    Ok(ReplicationResult {
        replication_index,
        completed,
        in_flight,
        stations: config
            .stations
            .iter()
            .zip(stations)
            .map(|(cfg, st)| StationTrace {
                station_id: cfg.id.clone(),
                busy_min: st.busy_min,
                wait_total_min: st.wait_total_min,
                served: st.served,
            })
            .collect(),
        span,
    })
}

fn annotate(index: u64) -> impl FnOnce(SimError) -> SimError {
    move |source| SimError::Replication { index, source: Box::new(source) }
}

/// Run `n` independent replications sequentially. Result `i` is
/// bit-identical to `run_replication` with `replication_index = i`.
pub fn run_replications_sequential(
    config: &LineConfig,
    base_seed: u64,
    n: u64,
    horizon: SimTime,
) -> Result<Vec<ReplicationResult>, SimError> {
    (0..n)
        .map(|i| {
            run_replication(config, RandomStream::new(base_seed, i), horizon).map_err(annotate(i))
        })
        .collect()
}

/// Run `n` independent replications, in parallel when the `parallel`
/// feature is enabled. Results are returned in replication order and do
/// not depend on worker count.
#[cfg(feature = "parallel")]
pub fn run_replications(
    config: &LineConfig,
    base_seed: u64,
    n: u64,
    horizon: SimTime,
) -> Result<Vec<ReplicationResult>, SimError> {
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| {
            run_replication(config, RandomStream::new(base_seed, i), horizon).map_err(annotate(i))
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_replications(
    config: &LineConfig,
    base_seed: u64,
    n: u64,
    horizon: SimTime,
) -> Result<Vec<ReplicationResult>, SimError> {
    run_replications_sequential(config, base_seed, n, horizon)
}
