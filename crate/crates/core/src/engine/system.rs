//! The two state representations driven by the event loops: aggregate
//! occupancy counts and individual pools.

use crate::controller::threshold_update;
use crate::dispatch::{dispatch, Band, DispatchDecision};
use crate::occupancy::{OccupancyMeasure, StateError};
use crate::policy::{floor_scaled, PolicyState};

pub(crate) trait PoolSystem {
    fn n(&self) -> u32;
    /// Largest task count held by any pool.
    fn max_level(&self) -> usize;
    /// Pools holding exactly `level` tasks.
    fn pools_at(&self, level: usize) -> u32;
    fn total_tasks(&self) -> u64;
    /// Controller step computed on the current (pre-arrival) state.
    fn threshold_step(&self, policy: &PolicyState) -> i64;
    /// Routes one task with selection variable `u` and places it.
    fn admit(&mut self, policy: &PolicyState, u: f64) -> Result<DispatchDecision, StateError>;
    fn depart(&mut self, level: usize) -> Result<(), StateError>;
    /// Consistency check after an event that touched `level`.
    fn check(&self, level: usize) -> Result<(), StateError>;
    fn occupancy(&self) -> OccupancyMeasure;
}

pub(crate) struct Aggregate {
    occ: OccupancyMeasure,
    n: u32,
}

impl Aggregate {
    pub fn new(occ: OccupancyMeasure) -> Self {
        let n = occ.n();
        Self { occ, n }
    }
}

impl PoolSystem for Aggregate {
    fn n(&self) -> u32 {
        self.n
    }

    fn max_level(&self) -> usize {
        self.occ.max_occupied_level()
    }

    fn pools_at(&self, level: usize) -> u32 {
        self.occ.pools_at(level)
    }

    fn total_tasks(&self) -> u64 {
        self.occ.total_tasks()
    }

    fn threshold_step(&self, policy: &PolicyState) -> i64 {
        threshold_update(&self.occ, policy)
    }

    fn admit(&mut self, policy: &PolicyState, u: f64) -> Result<DispatchDecision, StateError> {
        let decision = dispatch(&self.occ, policy, u);
        self.occ.apply_arrival(decision.target_level)?;
        Ok(decision)
    }

    fn depart(&mut self, level: usize) -> Result<(), StateError> {
        self.occ.apply_departure(level)
    }

    fn check(&self, level: usize) -> Result<(), StateError> {
        self.occ.check_local(level, self.n)
    }

    fn occupancy(&self) -> OccupancyMeasure {
        self.occ.clone()
    }
}

/// Per-pool task counts, indexed by pool id.
pub(crate) struct Pools {
    tasks: Vec<u32>,
}

impl Pools {
    pub fn from_occupancy(occ: &OccupancyMeasure) -> Self {
        let mut tasks = Vec::with_capacity(occ.n() as usize);
        for k in 0..occ.cap() {
            tasks.extend(std::iter::repeat_n(k as u32, occ.pools_at(k) as usize));
        }
        Self { tasks }
    }

    #[cfg(test)]
    pub fn tasks(&self) -> &[u32] {
        &self.tasks
    }

    fn at_least(&self, level: u32) -> u32 {
        self.tasks.iter().filter(|&&c| c >= level).count() as u32
    }
}

impl PoolSystem for Pools {
    fn n(&self) -> u32 {
        self.tasks.len() as u32
    }

    fn max_level(&self) -> usize {
        self.tasks.iter().copied().max().unwrap_or(0) as usize
    }

    fn pools_at(&self, level: usize) -> u32 {
        self.tasks.iter().filter(|&&c| c as usize == level).count() as u32
    }

    fn total_tasks(&self) -> u64 {
        self.tasks.iter().map(|&c| c as u64).sum()
    }

    fn threshold_step(&self, policy: &PolicyState) -> i64 {
        let n = self.n();
        let up = self.at_least(policy.h()) + 1 >= n;
        let down = self.at_least(policy.ell()) <= policy.control().cutoff();
        policy.delta() as i64 * (up as i64 - down as i64)
    }

    fn admit(&mut self, policy: &PolicyState, u: f64) -> Result<DispatchDecision, StateError> {
        let mut order: Vec<usize> = (0..self.tasks.len()).collect();
        order.sort_by_key(|&id| (self.tasks[id], id));
        let below_ell = self.tasks.iter().filter(|&&c| c < policy.ell()).count();
        let below_h = self.tasks.iter().filter(|&&c| c < policy.h()).count();
        let (band, eligible) = if below_ell > 0 {
            (Band::Low, below_ell)
        } else if below_h > 0 {
            (Band::Mid, below_h)
        } else {
            (Band::High, self.tasks.len())
        };
        let pool = order[floor_scaled(u, eligible as u64) as usize];
        self.tasks[pool] += 1;
        Ok(DispatchDecision { target_level: self.tasks[pool] as usize, band })
    }

    fn depart(&mut self, level: usize) -> Result<(), StateError> {
        let pool =
            self.tasks.iter().position(|&c| c as usize == level && level > 0).ok_or(StateError::NoPoolAt { level })?;
        self.tasks[pool] -= 1;
        Ok(())
    }

    fn check(&self, _level: usize) -> Result<(), StateError> {
        Ok(())
    }

    fn occupancy(&self) -> OccupancyMeasure {
        let top = self.max_level();
        let mut counts = vec![0u32; top + 2];
        for &c in &self.tasks {
            for slot in counts.iter_mut().take(c as usize + 1) {
                *slot += 1;
            }
        }
        OccupancyMeasure::from_counts(counts).expect("pool counts form a valid occupancy")
    }
}
