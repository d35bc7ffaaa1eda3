//! Seed handling shared by every stochastic operation.
//!
//! All randomness comes from [`ChaCha8Rng`], which produces the same stream on
//! every platform. Per-item seeds are derived from a master seed with
//! [`derive_seed`] so that work can be split across threads in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for item `index` under `master`: `mix64(master ^ mix64(index))`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
