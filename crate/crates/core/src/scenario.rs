//! Scenario description: system size, rates, policy parameters, initial state and seeds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrival::{ArrivalRateFn, RateError};
use crate::occupancy::{OccupancyMeasure, StateError};
use crate::policy::{AlphaRule, ControlParam, PolicyError, PolicyState};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("n must be positive")]
    NoPools,
    #[error("mu must be positive and finite, got {0}")]
    BadMu(f64),
    #[error("horizon T must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("sample grid step must be positive and finite, got {0}")]
    BadGrid(f64),
    #[error("arrival rate covers [0, {covered}] but horizon is {horizon}")]
    ShortRate { covered: f64, horizon: f64 },
    #[error("initial levels describe {got} pools, expected n={n}")]
    InitSize { n: u32, got: u64 },
    #[error("interval [{0}, {1}] is not inside [0, T]")]
    BadInterval(f64, f64),
    #[error("v level must be at least 1")]
    BadVLevel,
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    /// Exact thinning of a dominating constant-rate process.
    #[default]
    Thinning,
    /// Time-changed unit-rate skeletons shared across system sizes.
    Coupled,
    /// Per-pool simulation on the coupled primitives.
    Oracle,
}

impl std::fmt::Display for EngineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EngineMode::Thinning => "thinning",
            EngineMode::Coupled => "coupled",
            EngineMode::Oracle => "oracle",
        })
    }
}

impl std::str::FromStr for EngineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "thinning" => Ok(EngineMode::Thinning),
            "coupled" => Ok(EngineMode::Coupled),
            "oracle" => Ok(EngineMode::Oracle),
            other => Err(format!("unknown mode '{other}' (expected thinning, coupled or oracle)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialCondition {
    /// `levels[k]` pools start with exactly `k` tasks; empty means all pools empty.
    #[serde(default)]
    pub levels: Vec<u32>,
    #[serde(default)]
    pub ell0: u32,
}

fn default_grid() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: u32,
    pub mu: f64,
    pub delta: u32,
    pub alpha: AlphaRule,
    pub lambda: ArrivalRateFn,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub init: InitialCondition,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: EngineMode,
    #[serde(default = "default_grid")]
    pub grid: f64,
    /// Levels `j` whose tail mass `v_n(j)` is sampled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v_levels: Vec<u32>,
    /// Intervals `[a, b]` to certify and check for settling.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<[f64; 2]>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n == 0 {
            return Err(ScenarioError::NoPools);
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(ScenarioError::BadMu(self.mu));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ScenarioError::BadHorizon(self.horizon));
        }
        if !(self.grid > 0.0 && self.grid.is_finite()) {
            return Err(ScenarioError::BadGrid(self.grid));
        }
        if self.lambda.end() < self.horizon {
            return Err(ScenarioError::ShortRate { covered: self.lambda.end(), horizon: self.horizon });
        }
        if self.v_levels.contains(&0) {
            return Err(ScenarioError::BadVLevel);
        }
        for &[a, b] in &self.intervals {
            if !(0.0 <= a && a < b && b <= self.horizon) {
                return Err(ScenarioError::BadInterval(a, b));
            }
        }
        self.initial_occupancy()?;
        self.initial_policy()?;
        Ok(())
    }

    pub fn initial_occupancy(&self) -> Result<OccupancyMeasure, ScenarioError> {
        if self.init.levels.is_empty() {
            return Ok(OccupancyMeasure::empty(self.n)?);
        }
        let got: u64 = self.init.levels.iter().map(|&c| c as u64).sum();
        if got != self.n as u64 {
            return Err(ScenarioError::InitSize { n: self.n, got });
        }
        Ok(OccupancyMeasure::from_level_sizes(&self.init.levels)?)
    }

    pub fn control(&self) -> Result<ControlParam, ScenarioError> {
        Ok(ControlParam::new(self.alpha, self.n)?)
    }

    pub fn initial_policy(&self) -> Result<PolicyState, ScenarioError> {
        Ok(PolicyState::new(self.init.ell0, self.delta, self.control()?)?)
    }

    /// The same scenario at a different system size, with the initial
    /// occupancy rescaled when it is given as whole-number fractions.
    pub fn with_n(&self, n: u32) -> Self {
        let mut out = self.clone();
        out.n = n;
        if !self.init.levels.is_empty() {
            let mut scaled: Vec<u32> =
                self.init.levels.iter().map(|&c| (c as u64 * n as u64 / self.n as u64) as u32).collect();
            let short = n - scaled.iter().sum::<u32>();
            scaled[0] += short;
            out.init.levels = scaled;
        }
        out
    }
}
