//! Keyed random streams and the stochastic primitives of the coupled construction.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed with the
//! stream id as its ChaCha stream number, so streams are independent and any
//! one of them can be regenerated on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recorded in output metadata.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), key = seed_from_u64(master seed), stream = process id";

/// Stream of the arrival skeleton; departure skeleton `i` uses stream `i`.
pub const ARRIVAL_STREAM: u64 = 0;
pub const SELECTION_STREAM: u64 = u64::MAX;
pub const THINNING_STREAM: u64 = u64::MAX - 1;

pub fn keyed_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exponential(1) by inversion.
#[inline]
pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(-unit_uniform(rng)).ln_1p()
}

/// Jump times of one unit-rate Poisson process, generated lazily and memoized.
#[derive(Debug, Clone)]
pub struct Skeleton {
    id: u64,
    rng: ChaCha8Rng,
    jumps: Vec<f64>,
}

impl Skeleton {
    pub fn new(seed: u64, id: u64) -> Self {
        Self { id, rng: keyed_stream(seed, id), jumps: Vec::new() }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// The `k`-th jump time, zero-based.
    pub fn jump(&mut self, k: usize) -> f64 {
        while self.jumps.len() <= k {
            let last = self.jumps.last().copied().unwrap_or(0.0);
            let next = last + unit_exponential(&mut self.rng);
            self.jumps.push(next);
        }
        self.jumps[k]
    }

    /// Jump times generated so far.
    pub fn generated(&self) -> &[f64] {
        &self.jumps
    }

    /// Number of jumps in `[0, horizon]`, generating as needed.
    pub fn count_until(&mut self, horizon: f64) -> usize {
        let mut k = 0;
        while self.jump(k) <= horizon {
            k += 1;
        }
        k
    }
}

/// The selection variables `U_1, U_2, ...`, consumed once per arrival in order.
#[derive(Debug, Clone)]
pub struct SelectionStream {
    rng: ChaCha8Rng,
    drawn: u64,
}

impl SelectionStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: keyed_stream(seed, SELECTION_STREAM), drawn: 0 }
    }

    pub fn next_value(&mut self) -> f64 {
        self.drawn += 1;
        unit_uniform(&mut self.rng)
    }

    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}

/// Driving Poisson skeletons `N_0, N_1, ...` for one master seed.
///
/// Skeleton jump times are memoized, so one value can be shared by runs of
/// different system sizes and every run sees the same randomness.
#[derive(Debug, Clone)]
pub struct DrivingPrimitives {
    seed: u64,
    skeletons: Vec<Skeleton>,
}

impl DrivingPrimitives {
    pub fn new(seed: u64) -> Self {
        Self { seed, skeletons: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn skeleton(&mut self, id: usize) -> &mut Skeleton {
        while self.skeletons.len() <= id {
            let next = self.skeletons.len() as u64;
            self.skeletons.push(Skeleton::new(self.seed, next));
        }
        &mut self.skeletons[id]
    }

    /// A fresh selection stream; every run starts from `U_1`.
    pub fn selection(&self) -> SelectionStream {
        SelectionStream::new(self.seed)
    }
}
