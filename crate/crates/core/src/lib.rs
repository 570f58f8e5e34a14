//! Simulation and analysis of adaptive threshold load balancing over
//! infinite-server pools with time-varying Poisson demand.

pub mod analysis;
pub mod arrival;
pub mod controller;
pub mod dispatch;
pub mod engine;
pub mod experiments;
pub mod fluid;
pub mod occupancy;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod trajectory;

pub use analysis::{audit, check_settling, delta_error, fslln_diag, AuditReport, SettlingReport};
pub use arrival::{ArrivalRateFn, RateError, Segment, Shape};
pub use controller::threshold_update;
pub use dispatch::{dispatch, Band, DispatchDecision};
pub use engine::{run, run_coupled, run_oracle, run_thinning, EngineError};
pub use fluid::{certify, solve_u, BoundedIntervalCertificate, FluidSolution};
pub use occupancy::{seq_metric, OccupancyMeasure, StateError};
pub use policy::{AlphaRule, ControlParam, PolicyState};
pub use rng::DrivingPrimitives;
pub use scenario::{EngineMode, InitialCondition, Scenario, ScenarioError};
pub use trajectory::{Event, EventKind, Sample, Trajectory};
