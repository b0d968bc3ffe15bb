//! Seed derivation so that independent work items (rooms, mics, sweep
//! points) get decorrelated generators regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child `index` in stream `stream` from `parent`.
pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(parent ^ mix64(stream)).wrapping_add(index))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream identifiers used with [`derive_seed`].
pub mod stream {
    pub const ROOM: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const SOURCE_AUDIO: u64 = 3;
    pub const SWEEP: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const INIT: u64 = 6;
}
