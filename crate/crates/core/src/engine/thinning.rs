use super::system::PoolSystem;
use super::{EngineError, Recorder};
use crate::policy::floor_scaled;
use crate::rng::{keyed_stream, unit_exponential, unit_uniform, SelectionStream, THINNING_STREAM};
use crate::scenario::Scenario;
use crate::trajectory::Event;

/// Total-rate race between candidate arrivals at `n lambda_max` and
/// departures at `mu` times the number of tasks in the system.
pub(super) fn drive<S: PoolSystem>(scenario: &Scenario, sys: &mut S) -> Result<(Vec<Event>, u64), EngineError> {
    let lambda = &scenario.lambda;
    let horizon = scenario.horizon;
    let (_, bound) = lambda.range_on(0.0, horizon);
    if !bound.is_finite() {
        return Err(EngineError::NonFiniteRate(0.0));
    }
    let candidate_rate = scenario.n as f64 * bound;
    let mut rng = keyed_stream(scenario.seed, THINNING_STREAM);
    let mut selection = SelectionStream::new(scenario.seed);
    let mut policy = scenario.initial_policy()?;
    let mut rec = Recorder::new();
    let mut t = 0.0;

    loop {
        let tasks = sys.total_tasks();
        let departure_rate = scenario.mu * tasks as f64;
        let total = candidate_rate + departure_rate;
        if total <= 0.0 {
            break;
        }
        t += unit_exponential(&mut rng) / total;
        if t > horizon {
            break;
        }
        if unit_uniform(&mut rng) * total < candidate_rate {
            let rate = lambda.rate(t);
            if !rate.is_finite() {
                return Err(EngineError::NonFiniteRate(t));
            }
            if rate > bound * (1.0 + 1e-12) {
                return Err(EngineError::RateExceeded { t, rate, bound });
            }
            if unit_uniform(&mut rng) * bound < rate {
                rec.arrival(sys, &mut policy, t, selection.next_value())?;
            }
        } else {
            // level i carries weight i D_i; the weights sum to the task count
            let mut k = floor_scaled(unit_uniform(&mut rng), tasks);
            let mut level = 1;
            loop {
                let weight = level as u64 * sys.pools_at(level) as u64;
                if k < weight {
                    break;
                }
                k -= weight;
                level += 1;
            }
            rec.departure(sys, &policy, t, level)?;
        }
    }
    Ok((rec.events, rec.checked))
}
