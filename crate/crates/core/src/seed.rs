//! Deterministic seed derivation.
//!
//! Every random draw in the crate goes through a [`ChaCha8Rng`] whose seed is
//! derived from a base seed and a path of indices, so results never depend on
//! execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `base` with `path` into a new 64-bit seed.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(base: u64, path: &[u64]) -> ChaCha8Rng {
    rng(derive(base, path))
}

/// Stream tags so unrelated draws sharing a base seed never collide.
pub mod stream {
    pub const CHANNEL: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const DATA: u64 = 5;
    pub const EVAL_NOISE: u64 = 6;
}
