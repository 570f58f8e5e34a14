//! Three-band threshold dispatching.
//!
//! A selection variable `u` in `[0, 1)` picks a pool through the interval
//! partitions `I_i(q)` and `J_i(q, j)`. Lookups run on integer counts: with
//! `E` eligible pools, `u` lands in the class whose cumulative range contains
//! `floor(u * E)`, which is exactly the half-open interval test.

use serde::{Deserialize, Serialize};

use crate::occupancy::OccupancyMeasure;
use crate::policy::{floor_scaled, PolicyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// Some pool is below `ell`.
    Low,
    /// Every pool is at `ell` or above, some below `h`.
    Mid,
    /// Every pool is at `h` or above.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchDecision {
    /// The task joins a pool holding exactly `target_level - 1` tasks.
    pub target_level: usize,
    pub band: Band,
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval { start: 0.0, end: 0.0 };

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn len(&self) -> f64 {
        (self.end - self.start).max(0.0)
    }

    pub fn contains(&self, u: f64) -> bool {
        self.start <= u && u < self.end
    }
}

/// `I_i(q) = [1 - q(i-1), 1 - q(i))` for `i >= 1`.
pub fn partition_i(occ: &OccupancyMeasure, i: usize) -> Interval {
    if i == 0 {
        return Interval::EMPTY;
    }
    Interval { start: 1.0 - occ.q(i - 1), end: 1.0 - occ.q(i) }
}

/// `J_i(q, j)` for `1 <= i <= j`; empty when `q(j) = 1`.
pub fn partition_j(occ: &OccupancyMeasure, i: usize, j: usize) -> Interval {
    let n = occ.n();
    if i == 0 || i > j || occ.count(j) == n {
        return Interval::EMPTY;
    }
    let below = (n - occ.count(j)) as f64;
    Interval { start: (n - occ.count(i - 1)) as f64 / below, end: (n - occ.count(i)) as f64 / below }
}

/// Level `i` of the pool at position `k` when pools are sorted by task count:
/// the unique `i` with `n - Q(i-1) <= k < n - Q(i)`. Requires `k < n`.
pub fn class_at_position(occ: &OccupancyMeasure, k: u64) -> usize {
    let n = occ.n() as u64;
    debug_assert!(k < n);
    let bar = (n - k) as u32;
    occ.counts().partition_point(|&c| c >= bar)
}

/// Routes one arrival. Panics if `u` is outside `[0, 1)`.
pub fn dispatch(occ: &OccupancyMeasure, policy: &PolicyState, u: f64) -> DispatchDecision {
    assert!((0.0..1.0).contains(&u), "selection variable {u} outside [0, 1)");
    let n = occ.n();
    let ell = policy.ell() as usize;
    let h = policy.h() as usize;
    let (band, eligible) = if occ.count(ell) < n {
        (Band::Low, n - occ.count(ell))
    } else if occ.count(h) < n {
        (Band::Mid, n - occ.count(h))
    } else {
        (Band::High, n)
    };
    // eligible pools form a prefix of the count-sorted order in every band
    let k = floor_scaled(u, eligible as u64);
    DispatchDecision { target_level: class_at_position(occ, k), band }
}
