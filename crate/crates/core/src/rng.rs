//! Seed plumbing. Every random draw in the crate goes through a ChaCha8
//! stream keyed by a 64-bit seed so results are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from a parent seed and a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) mod streams {
    pub const SCENE: u64 = 1;
    pub const CAPTION: u64 = 2;
    pub const QA: u64 = 3;
    pub const FEATURE: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const PROPOSAL: u64 = 6;
    pub const HYPOTHESIS: u64 = 7;
    pub const PREDICTOR: u64 = 8;
    pub const LANGUAGE: u64 = 9;
    pub const KMEANS: u64 = 10;
    pub const LEXICON: u64 = 11;
}
