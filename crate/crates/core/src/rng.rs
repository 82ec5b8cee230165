//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by `(seed, stream ids...)` so
//! results never depend on the order in which trials, channels or trees are
//! processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream identifiers.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(seed), |acc, &id| splitmix64(acc ^ splitmix64(id.wrapping_add(GOLDEN))))
}

/// A ChaCha8 generator for the given stream.
pub fn stream_rng(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Stream tags used across the crate, kept distinct so that streams never collide.
pub(crate) mod tag {
    pub const SPLIT: u64 = 1;
    pub const SYNTH: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const FOREST: u64 = 4;
    pub const BORUTA: u64 = 5;
    pub const INIT: u64 = 6;
    pub const SHUFFLE: u64 = 7;
    pub const HOLDOUT: u64 = 8;
}
