use alloc::sync::Arc;
use alloc::vec::Vec;

use super::EnvironmentChain;
use crate::rng::Substream;

/// A realised environment path `omega = (s_0, s_1, ...)` with a shift cursor.
///
/// States are drawn lazily, in order, from the substream `(seed, replica)`,
/// so reading position `k` always yields the same state regardless of access
/// order. Position `k` of a stream advanced by `t` is position `t + k` of the
/// original.
#[derive(Debug, Clone)]
pub struct OmegaStream {
    chain: Arc<EnvironmentChain>,
    seed: u64,
    replica: u64,
    source: Substream,
    history: Vec<usize>,
    cursor: usize,
}

impl OmegaStream {
    /// Stationary stream: `s_0` is drawn from the stationary law.
    pub fn new(chain: Arc<EnvironmentChain>, seed: u64, replica: u64) -> Self {
        let mut source = Substream::new(seed, replica);
        let s0 = chain.sample_initial(source.uniform());
        Self::with_source(chain, seed, replica, source, s0)
    }

    /// Stream conditioned on a given initial state.
    pub fn starting_at(chain: Arc<EnvironmentChain>, seed: u64, replica: u64, s0: usize) -> Self {
        assert!(s0 < chain.num_states(), "initial state out of range");
        let source = Substream::new(seed, replica);
        Self::with_source(chain, seed, replica, source, s0)
    }

    fn with_source(
        chain: Arc<EnvironmentChain>,
        seed: u64,
        replica: u64,
        source: Substream,
        s0: usize,
    ) -> Self {
        Self {
            chain,
            seed,
            replica,
            source,
            history: alloc::vec![s0],
            cursor: 0,
        }
    }

    /// Independent stationary stream on the same chain and seed.
    pub fn fork(&self, replica: u64) -> Self {
        Self::new(self.chain.clone(), self.seed, replica)
    }

    pub fn chain(&self) -> &Arc<EnvironmentChain> {
        &self.chain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    /// Total shift applied so far.
    pub fn offset(&self) -> usize {
        self.cursor
    }

    /// Shift by `t`: the result reads `s_{t+k}` at position `k`.
    pub fn advance(mut self, t: usize) -> Self {
        self.cursor += t;
        self
    }

    fn extend_to(&mut self, absolute: usize) {
        while self.history.len() <= absolute {
            let last = self.history[self.history.len() - 1];
            let next = self.chain.sample_next(last, self.source.uniform());
            self.history.push(next);
        }
    }

    /// State at position `k` relative to the cursor.
    pub fn state(&mut self, k: usize) -> usize {
        let absolute = self.cursor + k;
        self.extend_to(absolute);
        self.history[absolute]
    }

    /// States at positions `k..k + len`.
    pub fn window(&mut self, k: usize, len: usize) -> &[usize] {
        let start = self.cursor + k;
        self.extend_to(start + len.max(1) - 1);
        &self.history[start..start + len]
    }

    /// Makes sure positions `0..len` are realised.
    pub fn realize(&mut self, len: usize) {
        if len > 0 {
            self.extend_to(self.cursor + len - 1);
        }
    }

    /// Realised states from the cursor onwards (at least `len` of them).
    pub fn states(&mut self, len: usize) -> &[usize] {
        self.window(0, len)
    }
}
