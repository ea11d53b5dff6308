//! Reproducible random streams for Monte Carlo work.
//!
//! Every trajectory draws from its own ChaCha8 stream, keyed by the master
//! seed and selected by the trajectory index through ChaCha's 64-bit stream
//! id. ChaCha is counter based, so stream `k` is the same sequence no matter
//! which thread produces it or in which order trajectories are scheduled.
//! Gaussian variates come from `rand_distr::StandardNormal` (ziggurat).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A seeded source of independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamFactory {
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        StreamFactory { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream number `index`. Distinct indices give independent streams.
    pub fn stream(&self, index: u64) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        NoiseStream { rng }
    }
}

#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    /// Standard normal variate.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Wiener increment over `dt`, i.e. `Normal(0, dt)` given `sqrt_dt`.
    #[inline]
    pub fn wiener(&mut self, sqrt_dt: f64) -> f64 {
        sqrt_dt * self.gaussian()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}
