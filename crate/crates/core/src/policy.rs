//! Threshold policy state and the control parameter `alpha_n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("delta must be a positive integer")]
    ZeroDelta,
    #[error("threshold {ell} is not a multiple of delta={delta}")]
    NotMultiple { ell: u32, delta: u32 },
    #[error("alpha_n={alpha} outside (0, 1) for n={n}")]
    AlphaOutOfRange { alpha: f64, n: u32 },
}

/// How `alpha_n` is chosen for a system with `n` pools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// A fixed value in `(0, 1)`.
    Value(f64),
    /// `alpha_n = 1 - n^(-exponent)`.
    Exponent(f64),
}

impl AlphaRule {
    pub fn alpha(&self, n: u32) -> f64 {
        match *self {
            AlphaRule::Value(a) => a,
            AlphaRule::Exponent(e) => 1.0 - (n as f64).powf(-e),
        }
    }
}

/// `alpha_n` together with its integer form: the decrease condition
/// `q(ell) <= alpha_n` holds iff `Q(ell) <= cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParam {
    alpha: f64,
    cutoff: u32,
}

impl ControlParam {
    pub fn new(rule: AlphaRule, n: u32) -> Result<Self, PolicyError> {
        let alpha = rule.alpha(n);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PolicyError::AlphaOutOfRange { alpha, n });
        }
        let cutoff = match rule {
            AlphaRule::Value(a) => floor_scaled(a, n as u64) as u32,
            // Q <= n - n^(1-e)  <=>  n - Q >= ceil(n^(1-e))
            AlphaRule::Exponent(e) => {
                let slack = (n as f64).powf(1.0 - e);
                let nearest = slack.round();
                let slack = if (slack - nearest).abs() <= 1e-12 * nearest.max(1.0) { nearest } else { slack.ceil() };
                n.saturating_sub(slack as u32)
            }
        };
        Ok(Self { alpha, cutoff })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest `Q(ell)` that still triggers a decrease.
    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }
}

/// Exact `floor(u * e)` for `u` in `[0, 1)`, free of floating-point rounding.
pub fn floor_scaled(u: f64, e: u64) -> u64 {
    debug_assert!((0.0..1.0).contains(&u), "scaled value {u} outside [0, 1)");
    if u <= 0.0 {
        return 0;
    }
    let bits = u.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    // u = mant * 2^-shift
    let (mant, shift) = if exp_bits == 0 { (frac, 1074i64) } else { (frac | (1u64 << 52), 1075 - exp_bits) };
    if shift >= 128 {
        return 0;
    }
    ((mant as u128 * e as u128) >> shift) as u64
}

/// Current threshold `ell` (a multiple of `delta`), the step `delta`, and `alpha_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    ell: u32,
    delta: u32,
    control: ControlParam,
}

impl PolicyState {
    pub fn new(ell: u32, delta: u32, control: ControlParam) -> Result<Self, PolicyError> {
        if delta == 0 {
            return Err(PolicyError::ZeroDelta);
        }
        if !ell.is_multiple_of(delta) {
            return Err(PolicyError::NotMultiple { ell, delta });
        }
        Ok(Self { ell, delta, control })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// `h = ell + delta`.
    pub fn h(&self) -> u32 {
        self.ell + self.delta
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn control(&self) -> &ControlParam {
        &self.control
    }

    pub fn alpha(&self) -> f64 {
        self.control.alpha
    }

    /// Applies a signed step from the controller; the result stays a non-negative multiple of delta.
    pub fn apply_step(&mut self, step: i64) -> Result<(), PolicyError> {
        let next = self.ell as i64 + step;
        if next < 0 || next % self.delta as i64 != 0 {
            return Err(PolicyError::NotMultiple { ell: next.max(0) as u32, delta: self.delta });
        }
        self.ell = next as u32;
        Ok(())
    }
}
