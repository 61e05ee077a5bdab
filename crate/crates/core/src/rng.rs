//! Deterministic random-number streams.
//!
//! Every stochastic stage in the pipeline draws from a [`SeededRng`]: a
//! ChaCha8 generator addressed by `(seed, stream)`. Independent stages and
//! per-episode/per-sample work items get their own stream id, so parallel
//! execution and resumption reproduce the single-threaded sequence exactly.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Well-known stream ids. Per-item streams are derived by adding the item
/// index to a base, so bases are spaced far apart.
pub mod streams {
    pub const WEIGHT_INIT: u64 = 1;
    pub const REPLAY_SAMPLING: u64 = 2;
    pub const HYPERPARAM_SEARCH: u64 = 3;
    pub const EPISODE_SETUP_BASE: u64 = 1 << 32;
    pub const EPISODE_DYNAMICS_BASE: u64 = 2 << 32;
    pub const EXPLORATION_BASE: u64 = 3 << 32;
    pub const EVAL_EPISODE_BASE: u64 = 4 << 32;
    pub const SCORE_SAMPLE_BASE: u64 = 5 << 32;
}

/// A ChaCha8 stream with enough bookkeeping to snapshot and restore its
/// exact position.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

/// Serializable position of a [`SeededRng`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSnapshot {
    pub seed: u64,
    pub stream: u64,
    pub word_pos_hi: u64,
    pub word_pos_lo: u64,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn snapshot(&self) -> RngSnapshot {
        let pos = self.inner.get_word_pos();
        RngSnapshot {
            seed: self.seed,
            stream: self.stream,
            word_pos_hi: (pos >> 64) as u64,
            word_pos_lo: pos as u64,
        }
    }

    pub fn restore(snap: &RngSnapshot) -> Self {
        let mut rng = Self::new(snap.seed, snap.stream);
        let pos = ((snap.word_pos_hi as u128) << 64) | snap.word_pos_lo as u128;
        rng.inner.set_word_pos(pos);
        rng
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}
