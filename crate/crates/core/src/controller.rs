//! Threshold adjustment evaluated at every arrival epoch.
//!
//! Both conditions read the state right before the arrival; the resulting
//! step is applied after the task has been dispatched.

use thiserror::Error;

use crate::occupancy::OccupancyMeasure;
use crate::policy::{AlphaRule, ControlParam, PolicyError, PolicyState};

/// `delta * (1{Q(h) >= n - 1} - 1{Q(ell) <= alpha_n n})` on the pre-arrival state.
pub fn threshold_update(pre: &OccupancyMeasure, policy: &PolicyState) -> i64 {
    let n = pre.n();
    let increase = pre.count(policy.h() as usize) + 1 >= n;
    let decrease = pre.count(policy.ell() as usize) <= policy.control().cutoff();
    policy.delta() as i64 * (increase as i64 - decrease as i64)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZeroThresholdError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Outcome of [`update_is_noop_at_zero`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroThresholdCheck {
    /// The decrease indicator, which must be zero at `ell = 0`.
    pub decrease_indicator: bool,
    pub step: i64,
}

/// At `ell = 0` the decrease condition reads `Q(0) = n <= alpha n`, impossible for `alpha < 1`.
pub fn update_is_noop_at_zero(
    pre: &OccupancyMeasure,
    delta: u32,
    alpha: f64,
) -> Result<ZeroThresholdCheck, ZeroThresholdError> {
    let control = ControlParam::new(AlphaRule::Value(alpha), pre.n())?;
    let policy = PolicyState::new(0, delta, control)?;
    let decrease_indicator = pre.count(0) <= control.cutoff();
    Ok(ZeroThresholdCheck { decrease_indicator, step: threshold_update(pre, &policy) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(ell: u32, delta: u32, alpha: f64, n: u32) -> PolicyState {
        PolicyState::new(ell, delta, ControlParam::new(AlphaRule::Value(alpha), n).unwrap()).unwrap()
    }

    /// n = 100 state with `Q(k)` given for k = 1..
    fn state(q: &[u32]) -> OccupancyMeasure {
        let mut counts = vec![100];
        counts.extend_from_slice(q);
        OccupancyMeasure::from_counts(counts).unwrap()
    }

    #[test]
    fn decrease_when_fraction_at_ell_drops() {
        let pre = state(&[100, 85, 10]);
        assert_eq!(threshold_update(&pre, &policy(2, 1, 0.9, 100)), -1);
    }

    #[test]
    fn increase_when_nearly_all_reach_h() {
        let pre = state(&[100, 100, 100, 3]);
        assert_eq!(threshold_update(&pre, &policy(2, 1, 0.9, 100)), 1);
        // n - 1 suffices
        let pre = state(&[100, 100, 99, 3]);
        assert_eq!(threshold_update(&pre, &policy(2, 1, 0.9, 100)), 1);
        let pre = state(&[100, 100, 98, 3]);
        assert_eq!(threshold_update(&pre, &policy(2, 1, 0.9, 100)), 0);
    }

    #[test]
    fn neither_condition() {
        let pre = state(&[100, 95, 50]);
        assert_eq!(threshold_update(&pre, &policy(2, 1, 0.9, 100)), 0);
    }

    #[test]
    fn both_conditions_cancel() {
        // alpha >= 1 - 1/n makes both possible: Q(ell) = Q(h) = 99
        let pre = state(&[99, 99, 0]);
        assert_eq!(threshold_update(&pre, &policy(1, 1, 0.995, 100)), 0);
    }

    #[test]
    fn zero_threshold_never_decreases() {
        let pre = state(&[70, 20]);
        let check = update_is_noop_at_zero(&pre, 1, 0.99).unwrap();
        assert!(!check.decrease_indicator);
        assert_eq!(check.step, 0);

        let ten = OccupancyMeasure::from_counts(vec![10, 10, 10, 0]).unwrap();
        let check = update_is_noop_at_zero(&ten, 2, 0.5).unwrap();
        assert_eq!(check.step, 2);

        assert!(update_is_noop_at_zero(&pre, 1, 1.0).is_err());
    }

    #[test]
    fn step_non_increasing_in_alpha() {
        let pre = state(&[100, 91, 40]);
        let mut last = i64::MAX;
        for alpha in [0.5, 0.8, 0.9, 0.905, 0.91, 0.95] {
            let step = threshold_update(&pre, &policy(2, 1, alpha, 100));
            assert!(step <= last);
            last = step;
        }
        assert_eq!(last, -1);
    }
}
