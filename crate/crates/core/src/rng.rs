//! Deterministic random source.
//!
//! Every consumer draws from a ChaCha8 keystream keyed by `seed` and
//! positioned on stream `replica`, so replicas never share state and any
//! `(seed, replica)` pair can be replayed in isolation.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct Substream {
    inner: ChaCha8Rng,
}

impl Substream {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(replica);
        Self { inner }
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as f64;
        lo + ((self.uniform() * span) as usize).min(hi - lo)
    }

    /// Standard exponential draw, used to build Dirichlet(1, ..., 1) vectors.
    pub fn exponential(&mut self) -> f64 {
        -libm::log(1.0 - self.uniform())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
