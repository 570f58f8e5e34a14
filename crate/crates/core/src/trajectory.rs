//! Event logs and sampled series produced by the engines.
//!
//! A trajectory is fully determined by its initial state and its event log;
//! every derived quantity (samples, sups, error processes) is recomputed by
//! replaying the log.

use serde::{Deserialize, Serialize};

use crate::occupancy::{OccupancyMeasure, StateError};
use crate::scenario::EngineMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Departure,
    ThresholdUp,
    ThresholdDown,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Departure => "departure",
            EventKind::ThresholdUp => "threshold_up",
            EventKind::ThresholdDown => "threshold_down",
        }
    }
}

/// One log record. Arrivals and departures carry the occupancy level they
/// touched; threshold changes carry level 0 and share the arrival timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub level: u32,
    pub ell_pre: u32,
    pub ell_post: u32,
}

impl Event {
    /// Comparison key with the time taken bit-for-bit.
    pub fn key(&self) -> (u64, EventKind, u32, u32, u32) {
        (self.t.to_bits(), self.kind, self.level, self.ell_pre, self.ell_post)
    }
}

/// State snapshot at a grid time (after every event with time `<= t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub ell: u32,
    pub arrivals: u64,
    pub departures: u64,
    pub occupancy: OccupancyMeasure,
}

impl Sample {
    pub fn total_mass(&self) -> f64 {
        self.occupancy.total_mass()
    }

    pub fn tail_mass(&self, j: usize) -> f64 {
        self.occupancy.tail_mass(j.max(1)).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: u32,
    pub mu: f64,
    pub delta: u32,
    pub horizon: f64,
    pub grid: f64,
    pub seed: u64,
    pub mode: EngineMode,
    pub initial: OccupancyMeasure,
    pub ell0: u32,
    pub events: Vec<Event>,
    pub samples: Vec<Sample>,
    pub final_state: OccupancyMeasure,
    pub final_ell: u32,
    pub arrivals: u64,
    pub departures: u64,
    /// Events after which the per-event invariant checks passed.
    pub checked_events: u64,
}

pub(crate) struct TrajectoryMeta {
    pub n: u32,
    pub mu: f64,
    pub delta: u32,
    pub horizon: f64,
    pub grid: f64,
    pub seed: u64,
    pub mode: EngineMode,
}

impl Trajectory {
    /// Replays `events` from the initial state and samples on the grid.
    pub(crate) fn assemble(
        meta: TrajectoryMeta,
        initial: OccupancyMeasure,
        ell0: u32,
        events: Vec<Event>,
        checked_events: u64,
    ) -> Result<Self, StateError> {
        let mut traj = Trajectory {
            n: meta.n,
            mu: meta.mu,
            delta: meta.delta,
            horizon: meta.horizon,
            grid: meta.grid,
            seed: meta.seed,
            mode: meta.mode,
            final_state: initial.clone(),
            initial,
            ell0,
            events,
            samples: Vec::new(),
            final_ell: ell0,
            arrivals: 0,
            departures: 0,
            checked_events,
        };
        let times = grid_times(traj.horizon, traj.grid);
        let mut samples = Vec::with_capacity(times.len());
        let mut replay = traj.replay();
        for t in times {
            while replay.next_time().is_some_and(|te| te <= t) {
                replay.step()?;
            }
            samples.push(replay.sample(t));
        }
        while replay.step()?.is_some() {}
        let (final_state, final_ell, arrivals, departures) =
            (replay.occupancy().clone(), replay.ell(), replay.arrivals(), replay.departures());
        traj.samples = samples;
        traj.final_state = final_state;
        traj.final_ell = final_ell;
        traj.arrivals = arrivals;
        traj.departures = departures;
        Ok(traj)
    }

    pub fn replay(&self) -> Replay<'_> {
        Replay { events: &self.events, next: 0, occ: self.initial.clone(), ell: self.ell0, arrivals: 0, departures: 0 }
    }

    /// Visits the constant pieces `[start, end)` of the path over `[0, horizon]`.
    /// Simultaneous events (an arrival and its threshold change) are applied together.
    pub fn for_each_piece<F>(&self, mut f: F)
    where
        F: FnMut(f64, f64, &Replay<'_>),
    {
        let mut replay = self.replay();
        let mut start = 0.0;
        loop {
            let end = replay.next_time().unwrap_or(self.horizon).min(self.horizon);
            if end > start {
                f(start, end, &replay);
            }
            let Some(te) = replay.next_time() else { break };
            while replay.next_time() == Some(te) {
                replay.step().expect("trajectory log replays");
            }
            start = te;
        }
    }

    /// `n u_n(t) = n u_n(0) + arrivals - departures` at every sample and at the end.
    pub fn counting_identity_holds(&self) -> bool {
        let base = self.initial.total_tasks() as i128;
        let check = |occ: &OccupancyMeasure, a: u64, d: u64| occ.total_tasks() as i128 == base + a as i128 - d as i128;
        self.samples.iter().all(|s| check(&s.occupancy, s.arrivals, s.departures))
            && check(&self.final_state, self.arrivals, self.departures)
    }

    /// Highest occupancy level reached anywhere on the path.
    pub fn max_level(&self) -> usize {
        let mut level = self.initial.max_occupied_level();
        for e in &self.events {
            if e.kind == EventKind::Arrival {
                level = level.max(e.level as usize);
            }
        }
        level
    }
}

/// `0, grid, 2 grid, ...` up to the horizon, which is always included.
pub fn grid_times(horizon: f64, grid: f64) -> Vec<f64> {
    let steps = (horizon / grid + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * grid).filter(|&t| t <= horizon).collect();
    if times.last().is_none_or(|&t| t < horizon) {
        times.push(horizon);
    }
    times
}

/// Cursor that re-applies a trajectory's events one at a time.
#[derive(Debug, Clone)]
pub struct Replay<'a> {
    events: &'a [Event],
    next: usize,
    occ: OccupancyMeasure,
    ell: u32,
    arrivals: u64,
    departures: u64,
}

impl<'a> Replay<'a> {
    pub fn next_time(&self) -> Option<f64> {
        self.events.get(self.next).map(|e| e.t)
    }

    /// Applies the next event and returns it, or `None` at the end of the log.
    pub fn step(&mut self) -> Result<Option<&'a Event>, StateError> {
        let Some(event) = self.events.get(self.next) else {
            return Ok(None);
        };
        match event.kind {
            EventKind::Arrival => {
                self.occ.apply_arrival(event.level as usize)?;
                self.arrivals += 1;
            }
            EventKind::Departure => {
                self.occ.apply_departure(event.level as usize)?;
                self.departures += 1;
            }
            EventKind::ThresholdUp | EventKind::ThresholdDown => self.ell = event.ell_post,
        }
        self.next += 1;
        Ok(Some(event))
    }

    pub fn occupancy(&self) -> &OccupancyMeasure {
        &self.occ
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn departures(&self) -> u64 {
        self.departures
    }

    pub fn sample(&self, t: f64) -> Sample {
        Sample { t, ell: self.ell, arrivals: self.arrivals, departures: self.departures, occupancy: self.occ.clone() }
    }
}
