//! Aggregate occupancy state of `n` exchangeable server pools.
//!
//! The state is the non-increasing sequence `Q(i)` = number of pools holding
//! at least `i` tasks. Pool identities are dropped; only level counts are kept.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("arrival at level {level}: no pool holds exactly {} tasks", .level.saturating_sub(1))]
    NoPoolBelow { level: usize },
    #[error("departure at level {level}: no pool holds exactly {level} tasks")]
    NoPoolAt { level: usize },
    #[error("level must be at least 1, got {0}")]
    LevelZero(usize),
    #[error("occupancy needs at least one pool")]
    NoPools,
    #[error("Q(0) must equal n={n}, got {got}")]
    BadTotal { n: u32, got: u32 },
    #[error("occupancy not non-increasing at level {level}: Q({level})={upper} > Q({})={lower}", .level - 1)]
    NotMonotone { level: usize, upper: u32, lower: u32 },
    #[error("pool sizes sum to {got}, expected n={n}")]
    SizeMismatch { n: u32, got: u64 },
}

/// Counts `Q(0..=cap)` of pools with at least `i` tasks, with `Q(cap) = 0`.
///
/// Equality ignores how many trailing zero levels are tracked.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct OccupancyMeasure {
    counts: Vec<u32>,
}

impl OccupancyMeasure {
    /// All `n` pools empty.
    pub fn empty(n: u32) -> Result<Self, StateError> {
        if n == 0 {
            return Err(StateError::NoPools);
        }
        Ok(Self { counts: vec![n, 0] })
    }

    /// Builds the state from `Q(0), Q(1), ...`. A trailing zero is appended if missing.
    pub fn from_counts(mut counts: Vec<u32>) -> Result<Self, StateError> {
        let n = *counts.first().ok_or(StateError::NoPools)?;
        if n == 0 {
            return Err(StateError::NoPools);
        }
        for level in 1..counts.len() {
            if counts[level] > counts[level - 1] {
                return Err(StateError::NotMonotone { level, upper: counts[level], lower: counts[level - 1] });
            }
        }
        while counts.len() > 2 && counts[counts.len() - 1] == 0 && counts[counts.len() - 2] == 0 {
            counts.pop();
        }
        if *counts.last().unwrap() != 0 {
            counts.push(0);
        }
        Ok(Self { counts })
    }

    /// Builds the state from pool sizes: `sizes[k]` pools hold exactly `k` tasks.
    pub fn from_level_sizes(sizes: &[u32]) -> Result<Self, StateError> {
        let total: u64 = sizes.iter().map(|&s| s as u64).sum();
        if total == 0 {
            return Err(StateError::NoPools);
        }
        let n = u32::try_from(total).map_err(|_| StateError::SizeMismatch { n: u32::MAX, got: total })?;
        let mut counts = Vec::with_capacity(sizes.len() + 1);
        let mut at_least = n;
        for &size in sizes {
            counts.push(at_least);
            at_least -= size;
        }
        counts.push(0);
        Self::from_counts(counts)
    }

    pub fn n(&self) -> u32 {
        self.counts[0]
    }

    /// Highest tracked level; `Q(cap)` is always zero.
    pub fn cap(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `Q(i)`, zero above the tracked range.
    #[inline]
    pub fn count(&self, i: usize) -> u32 {
        self.counts.get(i).copied().unwrap_or(0)
    }

    /// Normalized `q(i) = Q(i)/n`.
    #[inline]
    pub fn q(&self, i: usize) -> f64 {
        self.count(i) as f64 / self.n() as f64
    }

    pub fn normalized(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Number of pools holding exactly `k` tasks.
    #[inline]
    pub fn pools_at(&self, k: usize) -> u32 {
        self.count(k) - self.count(k + 1)
    }

    /// Largest `i` with `Q(i) > 0` (zero when every pool is empty).
    pub fn max_occupied_level(&self) -> usize {
        self.counts.iter().rposition(|&c| c > 0).unwrap_or(0)
    }

    /// Places a task in a pool that holds exactly `level - 1` tasks.
    pub fn apply_arrival(&mut self, level: usize) -> Result<(), StateError> {
        if level == 0 {
            return Err(StateError::LevelZero(level));
        }
        if self.pools_at(level - 1) == 0 {
            return Err(StateError::NoPoolBelow { level });
        }
        if level >= self.cap() {
            let len = (2 * self.counts.len()).max(level + 2);
            self.counts.resize(len, 0);
        }
        self.counts[level] += 1;
        Ok(())
    }

    /// Removes a task from a pool that holds exactly `level` tasks.
    pub fn apply_departure(&mut self, level: usize) -> Result<(), StateError> {
        if level == 0 {
            return Err(StateError::LevelZero(level));
        }
        if self.pools_at(level) == 0 {
            return Err(StateError::NoPoolAt { level });
        }
        self.counts[level] -= 1;
        Ok(())
    }

    pub fn total_tasks(&self) -> u64 {
        self.counts[1..].iter().map(|&c| c as u64).sum()
    }

    /// Tasks held in levels `j, j+1, ...` (column sums of the occupancy diagram).
    pub fn tail_tasks(&self, j: usize) -> u64 {
        self.counts.iter().skip(j.max(1)).map(|&c| c as u64).sum()
    }

    /// `u_n = sum_{i >= 1} q(i)`.
    pub fn total_mass(&self) -> f64 {
        self.total_tasks() as f64 / self.n() as f64
    }

    /// `v_n(j) = sum_{i >= j} q(i)` for `j >= 1`.
    pub fn tail_mass(&self, j: usize) -> Result<f64, StateError> {
        if j == 0 {
            return Err(StateError::LevelZero(j));
        }
        Ok(self.tail_tasks(j) as f64 / self.n() as f64)
    }

    /// Counts up to and including the first zero level.
    pub fn trimmed(&self) -> &[u32] {
        &self.counts[..=self.max_occupied_level() + 1]
    }

    /// Full invariant check: `Q(0) = n > 0`, non-increasing, `Q(cap) = 0`.
    pub fn validate(&self) -> Result<(), StateError> {
        if self.n() == 0 {
            return Err(StateError::NoPools);
        }
        for level in 1..self.counts.len() {
            if self.counts[level] > self.counts[level - 1] {
                return Err(StateError::NotMonotone {
                    level,
                    upper: self.counts[level],
                    lower: self.counts[level - 1],
                });
            }
        }
        if self.counts[self.cap()] != 0 {
            return Err(StateError::NotMonotone { level: self.cap(), upper: self.counts[self.cap()], lower: 0 });
        }
        Ok(())
    }

    /// Cheap check around one touched level, used after every simulated event.
    pub(crate) fn check_local(&self, level: usize, n: u32) -> Result<(), StateError> {
        if self.counts[0] != n {
            return Err(StateError::BadTotal { n, got: self.counts[0] });
        }
        for i in level.max(1)..=(level + 1).min(self.cap()) {
            if self.counts[i] > self.counts[i - 1] {
                return Err(StateError::NotMonotone { level: i, upper: self.counts[i], lower: self.counts[i - 1] });
            }
        }
        if self.counts[self.cap()] != 0 {
            return Err(StateError::NotMonotone { level: self.cap(), upper: self.counts[self.cap()], lower: 0 });
        }
        Ok(())
    }
}

impl TryFrom<Vec<u32>> for OccupancyMeasure {
    type Error = StateError;

    fn try_from(counts: Vec<u32>) -> Result<Self, Self::Error> {
        Self::from_counts(counts)
    }
}

impl From<OccupancyMeasure> for Vec<u32> {
    fn from(occ: OccupancyMeasure) -> Self {
        occ.trimmed().to_vec()
    }
}

impl PartialEq for OccupancyMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.trimmed() == other.trimmed()
    }
}

impl Eq for OccupancyMeasure {}

impl std::hash::Hash for OccupancyMeasure {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.trimmed().hash(state);
    }
}

const METRIC_TAIL: f64 = 1e-12;

/// Product-topology metric `d(x, y) = sum_i min(|x(i) - y(i)|, 1) / 2^i`.
///
/// Missing trailing coordinates are read as zero. The sum stops once the
/// remaining geometric tail `2^{1-i}` drops below `1e-12`.
pub fn seq_metric(x: &[f64], y: &[f64]) -> f64 {
    let len = x.len().max(y.len());
    let mut total = 0.0;
    let mut weight = 1.0;
    for i in 0..len {
        if 2.0 * weight < METRIC_TAIL {
            break;
        }
        let xi = x.get(i).copied().unwrap_or(0.0);
        let yi = y.get(i).copied().unwrap_or(0.0);
        total += (xi - yi).abs().min(1.0) * weight;
        weight *= 0.5;
    }
    total
}
