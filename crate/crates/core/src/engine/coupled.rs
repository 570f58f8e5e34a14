//! Time-changed skeleton construction.
//!
//! Arrival `k` happens at `Lambda^{-1}(s_k / n)` where `s_k` is the k-th jump
//! of skeleton 0. Departures at level `i` fire when the compensator
//! `int mu i D_i ds` reaches the next jump of skeleton `i`.

use super::system::PoolSystem;
use super::{EngineError, Recorder};
use crate::rng::{DrivingPrimitives, ARRIVAL_STREAM};
use crate::scenario::Scenario;
use crate::trajectory::Event;

/// Consumed internal time of every departure skeleton after each event.
#[derive(Debug, Clone, Default)]
pub struct CompensatorTrace {
    pub times: Vec<f64>,
    pub consumed: Vec<Vec<f64>>,
}

pub(super) fn drive<S: PoolSystem>(
    scenario: &Scenario,
    prims: &mut DrivingPrimitives,
    sys: &mut S,
    mut trace: Option<&mut CompensatorTrace>,
) -> Result<(Vec<Event>, u64), EngineError> {
    let lambda = &scenario.lambda;
    lambda.check_invertible().map_err(EngineError::ModeUnsupported)?;
    let mu = scenario.mu;
    let horizon = scenario.horizon;
    let mut policy = scenario.initial_policy()?;
    let mut selection = prims.selection();
    let mut rec = Recorder::new();

    let mut t = 0.0;
    let mut arrivals = 0usize;
    let mut consumed: Vec<f64> = vec![0.0];
    let mut fired: Vec<usize> = vec![0];
    let mut next_arrival = arrival_epoch(scenario, prims, 0)?;

    loop {
        let top = sys.max_level();
        if consumed.len() <= top {
            consumed.resize(top + 1, 0.0);
            fired.resize(top + 1, 0);
        }
        // departure candidates; ties between levels go to the lower one
        let mut best: Option<(f64, usize)> = None;
        for i in 1..=top {
            let weight = i as u64 * sys.pools_at(i) as u64;
            if weight == 0 {
                continue;
            }
            let jump = prims.skeleton(i).jump(fired[i]);
            let at = (t + (jump - consumed[i]) / (mu * weight as f64)).max(t);
            if best.is_none_or(|(b, _)| at < b) {
                best = Some((at, i));
            }
        }
        let departure = best.filter(|&(at, _)| next_arrival.is_none_or(|ta| at <= ta));
        let next = match (departure, next_arrival) {
            (Some((at, _)), _) => at,
            (None, Some(ta)) => ta,
            (None, None) => break,
        };
        if next > horizon {
            break;
        }
        for i in 1..=top {
            let weight = i as u64 * sys.pools_at(i) as u64;
            if weight > 0 {
                let jump = prims.skeleton(i).jump(fired[i]);
                consumed[i] = (consumed[i] + mu * weight as f64 * (next - t)).min(jump);
            }
        }
        t = next;
        match departure {
            Some((_, level)) => {
                consumed[level] = prims.skeleton(level).jump(fired[level]);
                fired[level] += 1;
                rec.departure(sys, &policy, t, level)?;
            }
            None => {
                rec.arrival(sys, &mut policy, t, selection.next_value())?;
                arrivals += 1;
                next_arrival = arrival_epoch(scenario, prims, arrivals)?;
            }
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.times.push(t);
            trace.consumed.push(consumed.clone());
        }
    }
    Ok((rec.events, rec.checked))
}

/// Epoch of arrival `k` (zero-based), or `None` past the rate function's range.
fn arrival_epoch(scenario: &Scenario, prims: &mut DrivingPrimitives, k: usize) -> Result<Option<f64>, EngineError> {
    let s = prims.skeleton(ARRIVAL_STREAM as usize).jump(k);
    let mass = s / scenario.n as f64;
    if mass > scenario.lambda.cumulative(scenario.horizon) {
        return Ok(None);
    }
    scenario.lambda.inverse_cumulative(mass).map_err(EngineError::ModeUnsupported)
}
