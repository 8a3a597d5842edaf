//! Counter-based seed derivation.
//!
//! Every random draw in the pipeline is keyed by a path of integers below a
//! master seed, e.g. `(master, state, repetition)` for an image and
//! `(image_seed, PIXEL, pixel_index)` for one pixel. Each path element is
//! folded in with SplitMix64, so results do not depend on evaluation order
//! or thread scheduling. Generators are ChaCha8 seeded through
//! `seed_from_u64`, which is specified bit-for-bit across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags that separate independent uses of one seed.
pub mod stream {
    pub const MASK: u64 = 0x4d41_534b;
    pub const PIXEL: u64 = 0x5049_584c;
    pub const AFFINE: u64 = 0x4146_4649;
    pub const INIT: u64 = 0x494e_4954;
    pub const DROPOUT: u64 = 0x4452_4f50;
    pub const NEGATIVES: u64 = 0x4e45_4741;
    pub const TRIAL: u64 = 0x5452_494c;
    pub const TSNE: u64 = 0x5453_4e45;
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the node `path` below `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |h, &p| {
        splitmix64(h ^ splitmix64(p ^ 0xa076_1d64_78bd_642f))
    })
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
