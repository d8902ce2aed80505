//! Seedable, splittable random streams.
//!
//! Every consumer draws from its own ChaCha8 stream whose seed is derived from
//! the master seed and a tuple of tags (purpose, mode, round, ...), so results
//! do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags for [`stream`].
pub mod purpose {
    pub const START_POINTS: u64 = 0x5354_4152;
    pub const BURNIN_ROUND: u64 = 0x4255_524E;
    pub const MAIN_CHAIN: u64 = 0x4D41_494E;
    pub const AIR_SCHEDULE: u64 = 0x4149_5253;
    pub const SENSOR_DATA: u64 = 0x5345_4E53;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed from a master seed and tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |h, &t| splitmix64(h ^ splitmix64(t.wrapping_add(0xA076_1D64_78BD_642F))))
}

pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, tags))
}
