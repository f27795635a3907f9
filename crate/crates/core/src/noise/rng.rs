//! Counter-style random streams.
//!
//! Every draw is addressed by `(seed, path_index, lane)`: the pair
//! `(seed, path_index)` keys a ChaCha8 generator and `lane` selects one of its
//! 2⁶⁴ independent streams. Per-step sampling uses the step index as the lane,
//! so the numbers a path sees never depend on which thread ran it or in which
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const DOMAIN_TAG: &[u8; 8] = b"lgvsplit";
const PATH_LANE: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub path_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        RngStream { seed, path_index }
    }

    /// Generator for one lane of this stream.
    pub fn lane(&self, lane: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.path_index.to_le_bytes());
        key[16..24].copy_from_slice(DOMAIN_TAG);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(lane);
        rng
    }

    /// Generator used for whole-path draws (Brownian paths, Legendre paths).
    pub fn path_rng(&self) -> ChaCha8Rng {
        self.lane(PATH_LANE)
    }

    /// Generator for the increments of step `step`.
    pub fn step_rng(&self, step: u64) -> ChaCha8Rng {
        assert!(step != PATH_LANE, "step index collides with the path lane");
        self.lane(step)
    }

    /// A 64-bit seed derived from this stream (splitmix64 finalizer), used to
    /// give each realization a self-contained path seed.
    pub fn derived_seed(&self) -> u64 {
        let mut z = self
            .seed
            .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(self.path_index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}
