//! Deterministic seed splitting.
//!
//! Every random decision in a run is drawn from a stream derived from one root
//! seed, a per-module tag and an index (usually the timestamp). Streams never
//! share state, so adding draws in one module does not perturb another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags, one per consumer of randomness.
pub mod tag {
    pub const NOISE: u64 = 0x6e6f697365;
    pub const GENERATOR: u64 = 0x67656e;
    pub const KMEANS: u64 = 0x6b6d65616e73;
    pub const ELBOW: u64 = 0x656c626f77;
    pub const SUBSETS: u64 = 0x737562;
    pub const LANDMARK_FACTORS: u64 = 0x6c6d66;
    pub const SUBSET_INIT: u64 = 0x737569;
    pub const BASELINE: u64 = 0x62736c;
    pub const BENCH: u64 = 0x62656e6368;
    pub const SPECTRAL: u64 = 0x737065;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a tag and an index into a child seed.
pub fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

pub fn rng(seed: u64, tag: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive(seed, tag, index))
}
