//! Event-driven simulation of the occupancy and threshold processes.
//!
//! Three modes share one trajectory format:
//! - thinning: candidate arrivals at rate `n lambda_max`, accepted with
//!   probability `lambda(t) / lambda_max`; works for every rate shape.
//! - coupled: the time-changed unit-rate skeleton construction, with the
//!   same primitives reusable across system sizes.
//! - oracle: per-pool simulation on the coupled primitives, for small `n`.

mod coupled;
mod system;
mod thinning;

use thiserror::Error;

use crate::arrival::RateError;
use crate::dispatch::{Band, DispatchDecision};
use crate::occupancy::StateError;
use crate::policy::{PolicyError, PolicyState};
use crate::rng::DrivingPrimitives;
use crate::scenario::{EngineMode, Scenario, ScenarioError};
use crate::trajectory::{Event, EventKind, Trajectory, TrajectoryMeta};

use system::{Aggregate, PoolSystem, Pools};

pub use coupled::CompensatorTrace;

/// Largest system the per-pool oracle accepts.
pub const ORACLE_MAX_POOLS: u32 = 64;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("coupled construction needs an invertible cumulative rate: {0}")]
    ModeUnsupported(RateError),
    #[error("arrival rate {rate} at t={t} exceeds the thinning bound {bound}")]
    RateExceeded { t: f64, rate: f64, bound: f64 },
    #[error("arrival rate is not finite at t={0}")]
    NonFiniteRate(f64),
    #[error("oracle supports at most {max} pools, got n={n}")]
    TooManyPools { n: u32, max: u32 },
    #[error("state invariant violated: {0}")]
    Invariant(#[from] StateError),
    #[error("threshold invariant violated: {0}")]
    Policy(#[from] PolicyError),
    #[error("dispatch invariant violated at t={t}: {detail}")]
    Dispatch { t: f64, detail: String },
}

/// Runs the scenario in its configured mode with fresh primitives.
pub fn run(scenario: &Scenario) -> Result<Trajectory, EngineError> {
    match scenario.mode {
        EngineMode::Thinning => run_thinning(scenario),
        EngineMode::Coupled => run_coupled(scenario, &mut DrivingPrimitives::new(scenario.seed)),
        EngineMode::Oracle => run_oracle(scenario, &mut DrivingPrimitives::new(scenario.seed)),
    }
}

pub fn run_thinning(scenario: &Scenario) -> Result<Trajectory, EngineError> {
    scenario.validate()?;
    let mut sys = Aggregate::new(scenario.initial_occupancy()?);
    let (events, checked) = thinning::drive(scenario, &mut sys)?;
    finish(scenario, EngineMode::Thinning, events, checked)
}

/// Coupled construction; `primitives` may be shared between runs of different `n`.
pub fn run_coupled(scenario: &Scenario, primitives: &mut DrivingPrimitives) -> Result<Trajectory, EngineError> {
    scenario.validate()?;
    let mut sys = Aggregate::new(scenario.initial_occupancy()?);
    let (events, checked) = coupled::drive(scenario, primitives, &mut sys, None)?;
    finish(scenario, EngineMode::Coupled, events, checked)
}

/// Per-pool simulation on the same primitives as [`run_coupled`].
pub fn run_oracle(scenario: &Scenario, primitives: &mut DrivingPrimitives) -> Result<Trajectory, EngineError> {
    scenario.validate()?;
    if scenario.n > ORACLE_MAX_POOLS {
        return Err(EngineError::TooManyPools { n: scenario.n, max: ORACLE_MAX_POOLS });
    }
    let mut sys = Pools::from_occupancy(&scenario.initial_occupancy()?);
    let (events, checked) = coupled::drive(scenario, primitives, &mut sys, None)?;
    let traj = finish(scenario, EngineMode::Oracle, events, checked)?;
    if sys.occupancy() != traj.final_state {
        return Err(EngineError::Invariant(StateError::BadTotal { n: scenario.n, got: sys.occupancy().n() }));
    }
    Ok(traj)
}

/// Coupled run that also records every skeleton's consumed internal time after each event.
pub fn run_coupled_traced(
    scenario: &Scenario,
    primitives: &mut DrivingPrimitives,
) -> Result<(Trajectory, CompensatorTrace), EngineError> {
    scenario.validate()?;
    let mut sys = Aggregate::new(scenario.initial_occupancy()?);
    let mut trace = CompensatorTrace::default();
    let (events, checked) = coupled::drive(scenario, primitives, &mut sys, Some(&mut trace))?;
    Ok((finish(scenario, EngineMode::Coupled, events, checked)?, trace))
}

fn finish(scenario: &Scenario, mode: EngineMode, events: Vec<Event>, checked: u64) -> Result<Trajectory, EngineError> {
    let meta = TrajectoryMeta {
        n: scenario.n,
        mu: scenario.mu,
        delta: scenario.delta,
        horizon: scenario.horizon,
        grid: scenario.grid,
        seed: scenario.seed,
        mode,
    };
    let traj = Trajectory::assemble(meta, scenario.initial_occupancy()?, scenario.init.ell0, events, checked)?;
    if !traj.counting_identity_holds() {
        return Err(EngineError::Invariant(StateError::BadTotal { n: scenario.n, got: traj.final_state.n() }));
    }
    Ok(traj)
}

/// Event log with per-event invariant checks, shared by every loop.
pub(crate) struct Recorder {
    pub events: Vec<Event>,
    pub checked: u64,
}

impl Recorder {
    pub fn new() -> Self {
        Self { events: Vec::new(), checked: 0 }
    }

    /// Controller step on the pre-arrival state, dispatch, then the step.
    pub fn arrival<S: PoolSystem>(
        &mut self,
        sys: &mut S,
        policy: &mut PolicyState,
        t: f64,
        u: f64,
    ) -> Result<(), EngineError> {
        let step = sys.threshold_step(policy);
        let decision = sys.admit(policy, u)?;
        check_band(&decision, policy, t)?;
        let ell = policy.ell();
        self.events.push(Event {
            t,
            kind: EventKind::Arrival,
            level: decision.target_level as u32,
            ell_pre: ell,
            ell_post: ell,
        });
        sys.check(decision.target_level)?;
        self.checked += 1;
        if step != 0 {
            policy.apply_step(step)?;
            let kind = if step > 0 { EventKind::ThresholdUp } else { EventKind::ThresholdDown };
            self.events.push(Event { t, kind, level: 0, ell_pre: ell, ell_post: policy.ell() });
            if !policy.ell().is_multiple_of(policy.delta()) {
                return Err(PolicyError::NotMultiple { ell: policy.ell(), delta: policy.delta() }.into());
            }
            self.checked += 1;
        }
        Ok(())
    }

    pub fn departure<S: PoolSystem>(
        &mut self,
        sys: &mut S,
        policy: &PolicyState,
        t: f64,
        level: usize,
    ) -> Result<(), EngineError> {
        sys.depart(level)?;
        let ell = policy.ell();
        self.events.push(Event { t, kind: EventKind::Departure, level: level as u32, ell_pre: ell, ell_post: ell });
        sys.check(level)?;
        self.checked += 1;
        Ok(())
    }
}

/// The chosen pool must lie in the band's eligible set.
fn check_band(decision: &DispatchDecision, policy: &PolicyState, t: f64) -> Result<(), EngineError> {
    let before = decision.target_level as u32 - 1;
    let ok = match decision.band {
        Band::Low => before < policy.ell(),
        Band::Mid => policy.ell() <= before && before < policy.h(),
        Band::High => before >= policy.h(),
    };
    if ok {
        Ok(())
    } else {
        Err(EngineError::Dispatch {
            t,
            detail: format!(
                "{:?} band sent a task to a pool with {before} tasks (ell={})",
                decision.band,
                policy.ell()
            ),
        })
    }
}
