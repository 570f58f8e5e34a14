//! Built-in two-regime demand profile and the seed/size sweeps run on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    audit, boundedness_report, check_settling, convergence_metric, delta_error, sup_abs, sup_total_mass_error,
    AnalysisError, AuditReport, BoundednessReport, SettlingReport,
};
use crate::arrival::{ArrivalRateFn, Segment};
use crate::engine::{run, run_coupled, EngineError};
use crate::fluid::{certify, solve_u, BoundedIntervalCertificate};
use crate::policy::AlphaRule;
use crate::rng::DrivingPrimitives;
use crate::scenario::{EngineMode, InitialCondition, Scenario};
use crate::trajectory::Trajectory;

pub const HORIZON: f64 = 25.0;
pub const HIGH_LOAD: [f64; 2] = [3.0, 12.0];
pub const LOW_LOAD: [f64; 2] = [14.0, 23.0];
pub const ALPHA_EXPONENT: f64 = 0.48;

/// Offered load with unit service rate: `4.5 + 0.8 sin(10 t)` on the high-load
/// plateau, `1.5 + 0.2 sin(10 t)` on the low-load plateau, joined by linear ramps.
pub fn two_regime_lambda() -> ArrivalRateFn {
    let high = |t: f64| 4.5 + 0.8 * (10.0 * t).sin();
    let low = |t: f64| 1.5 + 0.2 * (10.0 * t).sin();
    ArrivalRateFn::new(vec![
        Segment::linear(0.0, 3.0, 0.0, high(3.0)),
        Segment::sinusoid(3.0, 12.0, 4.5, 0.8, 10.0, 0.0),
        Segment::linear(12.0, 14.0, high(12.0), low(14.0)),
        Segment::sinusoid(14.0, 23.0, 1.5, 0.2, 10.0, 0.0),
        Segment::linear(23.0, 25.0, low(23.0), 1.5),
    ])
    .expect("built-in profile is valid")
}

/// Piecewise-constant counterpart, usable by the coupled construction.
pub fn two_regime_steps() -> ArrivalRateFn {
    ArrivalRateFn::new(vec![
        Segment::constant(0.0, 3.0, 2.25),
        Segment::constant(3.0, 12.0, 4.5),
        Segment::constant(12.0, 14.0, 3.0),
        Segment::constant(14.0, 25.0, 1.5),
    ])
    .expect("built-in profile is valid")
}

/// Initially empty system, `ell(0) = 0`, `alpha_n = 1 - n^{-0.48}`, unit service rate.
pub fn two_regime_scenario(n: u32, delta: u32, seed: u64) -> Scenario {
    Scenario {
        n,
        mu: 1.0,
        delta,
        alpha: AlphaRule::Exponent(ALPHA_EXPONENT),
        lambda: two_regime_lambda(),
        horizon: HORIZON,
        init: InitialCondition::default(),
        seed,
        mode: EngineMode::Thinning,
        grid: 0.01,
        v_levels: vec![],
        intervals: vec![HIGH_LOAD, LOW_LOAD],
    }
}

pub fn two_regime_steps_scenario(n: u32, delta: u32, seed: u64) -> Scenario {
    Scenario { lambda: two_regime_steps(), mode: EngineMode::Coupled, ..two_regime_scenario(n, delta, seed) }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl From<crate::scenario::ScenarioError> for ExperimentError {
    fn from(e: crate::scenario::ScenarioError) -> Self {
        ExperimentError::Engine(e.into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalOutcome {
    pub certificate: BoundedIntervalCertificate,
    /// Present when the interval is certified.
    pub report: Option<SettlingReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub intervals: Vec<IntervalOutcome>,
    pub boundedness: BoundednessReport,
    pub audit: AuditReport,
}

/// Certificates for every interval listed in the scenario.
pub fn certificates(scenario: &Scenario) -> Result<Vec<BoundedIntervalCertificate>, ExperimentError> {
    let fluid = solve_u(scenario)?;
    Ok(scenario.intervals.iter().map(|&[a, b]| certify(&fluid, a, b, scenario.delta)).collect())
}

/// Runs one scenario and checks settling on each certified interval with
/// allowance `sigma + slack`.
pub fn settle_one(scenario: &Scenario, slack: f64) -> Result<(Trajectory, SeedOutcome), ExperimentError> {
    let traj = run(scenario)?;
    let outcome = assess(scenario, &traj, slack)?;
    Ok((traj, outcome))
}

pub fn assess(scenario: &Scenario, traj: &Trajectory, slack: f64) -> Result<SeedOutcome, ExperimentError> {
    let fluid = solve_u(scenario)?;
    let mut intervals = Vec::new();
    for certificate in certificates(scenario)? {
        let report = match (certificate.is_certified(), certificate.sigma) {
            (true, Some(sigma)) => Some(check_settling(traj, &certificate, sigma + slack, &fluid)?),
            _ => None,
        };
        intervals.push(IntervalOutcome { certificate, report });
    }
    Ok(SeedOutcome { seed: scenario.seed, intervals, boundedness: boundedness_report(traj), audit: audit(traj) })
}

/// Settling outcomes over many seeds, in parallel; trajectories are dropped.
pub fn settling_runs(base: &Scenario, seeds: &[u64], slack: f64) -> Result<Vec<SeedOutcome>, ExperimentError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let scenario = Scenario { seed, ..base.clone() };
            settle_one(&scenario, slack).map(|(_, outcome)| outcome)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u32,
    pub seed: u64,
    /// `sup_t |u_n(t) - u(t)|`.
    pub mass_error: f64,
    /// `sup_t |delta_n(t, j)|`.
    pub delta_error: f64,
    /// Sample-grid distance to the largest system of the same seed.
    pub metric_to_largest: f64,
    pub audit: AuditReport,
}

/// Coupled runs over `n_list` sharing one set of primitives per seed.
pub fn coupled_sweep(
    base: &Scenario,
    n_list: &[u32],
    seeds: &[u64],
    j: usize,
) -> Result<Vec<SweepRow>, ExperimentError> {
    let fluid = solve_u(base)?;
    let per_seed: Result<Vec<Vec<SweepRow>>, ExperimentError> = seeds
        .par_iter()
        .map(|&seed| {
            let mut prims = DrivingPrimitives::new(seed);
            let mut trajs = Vec::with_capacity(n_list.len());
            for &n in n_list {
                let scenario = Scenario { seed, mode: EngineMode::Coupled, ..base.with_n(n) };
                trajs.push(run_coupled(&scenario, &mut prims)?);
            }
            let largest = n_list.iter().enumerate().max_by_key(|(_, &n)| n).map(|(k, _)| k).unwrap_or(0);
            let mut rows = Vec::with_capacity(n_list.len());
            for (traj, &n) in trajs.iter().zip(n_list) {
                rows.push(SweepRow {
                    n,
                    seed,
                    mass_error: sup_total_mass_error(traj, &fluid),
                    delta_error: sup_abs(&delta_error(traj, j, &base.lambda, base.mu)?),
                    metric_to_largest: convergence_metric(traj, &trajs[largest])?,
                    audit: audit(traj),
                });
            }
            Ok(rows)
        })
        .collect();
    Ok(per_seed?.into_iter().flatten().collect())
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Median of `stat` per system size, in `n_list` order.
pub fn medians_by_n(rows: &[SweepRow], n_list: &[u32], stat: impl Fn(&SweepRow) -> f64) -> Vec<f64> {
    n_list.iter().map(|&n| median(&rows.iter().filter(|r| r.n == n).map(&stat).collect::<Vec<_>>())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::Verdict;

    #[test]
    fn profile_is_continuous_and_certified() {
        let f = two_regime_lambda();
        for knot in [3.0, 12.0, 14.0, 23.0] {
            let left = f.segments().iter().find(|s| s.end == knot).unwrap().rate(knot);
            assert!((left - f.rate(knot)).abs() < 1e-12, "{knot}");
        }
        let high = certificates(&two_regime_scenario(300, 3, 0)).unwrap();
        assert_eq!(high[0].verdict, Verdict::Certified);
        assert_eq!(high[0].m, Some(1));
        assert_eq!(high[1].m, Some(0));
        assert_eq!(high[1].verdict, Verdict::Certified);
        let unit = certificates(&two_regime_scenario(300, 1, 0)).unwrap();
        assert_eq!(unit[0].verdict, Verdict::NotBounded);
        assert_eq!(unit[0].m, None);
        assert_eq!((unit[1].m, unit[1].verdict), (Some(1), Verdict::Certified));
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        assert!(strictly_decreasing(&[1.0]));
    }

    #[test]
    fn small_sweep_runs() {
        let base = two_regime_steps_scenario(20, 1, 0);
        let rows = coupled_sweep(&base, &[10, 20], &[1, 2], 2).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().filter(|r| r.n == 20).all(|r| r.metric_to_largest == 0.0));
    }
}
