//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` whose seed is mixed
//! from a single master seed and a small tuple of counters (stream kind,
//! hyperplane index, batch index). Streams never depend on scheduling, so
//! results are identical for any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Purpose tag mixed into derived seeds so unrelated streams never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Initialization = 1,
    Walk = 2,
    Pairs = 3,
    Synthetic = 4,
    Sampling = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed(seed)
    }

    /// Mixes `(self, stream, a, b)` into a fresh seed.
    pub fn derive(self, stream: Stream, a: u64, b: u64) -> RngSeed {
        let mut h = splitmix64(self.0 ^ 0x6a09_e667_f3bc_c908);
        h = splitmix64(h ^ stream as u64);
        h = splitmix64(h ^ a);
        h = splitmix64(h ^ b);
        RngSeed(h)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn stream_rng(self, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
        self.derive(stream, a, b).rng()
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed(seed)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
