//! Counter-based random substreams.
//!
//! A [`RandomStream`] is keyed by `(master_seed, stream_id)`. The key maps to
//! a ChaCha8 generator whose 256-bit key comes from the master seed and whose
//! 64-bit stream word is the stream id, so every replication owns an
//! independent keystream and can be generated on any worker in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream ids at or above this value are reserved for auxiliary draws
/// (bootstrap resampling and the like) so they never collide with
/// replication ids.
pub const AUX_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RandomStream {
            master_seed,
            stream_id,
        }
    }

    /// Auxiliary stream `k` for the same master seed.
    pub fn auxiliary(master_seed: u64, k: u64) -> Self {
        RandomStream::new(master_seed, AUX_STREAM_BASE | k)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
