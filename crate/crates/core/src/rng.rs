//! Seed discipline.
//!
//! Every stochastic operation takes an explicit `u64` seed. Replicate `r` of
//! a Monte Carlo run with master seed `s` uses
//!
//! ```text
//! replicate_seed(s, r) = mix64(s + (r + 1) * 0x9E3779B97F4A7C15)   (mod 2^64)
//! mix64(z):
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!     z ^ (z >> 31)
//! ```
//!
//! i.e. the `(r + 1)`-th output of SplitMix64 started at `s`. A seed becomes
//! a generator by keying ChaCha8 with the next four SplitMix64 outputs from
//! that seed, little-endian. Both steps are fixed here rather than
//! delegated to `SeedableRng::seed_from_u64`, so derived streams do not
//! depend on library internals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-replicate seed, independent of execution order.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    mix64(master.wrapping_add(replicate.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&replicate_seed(seed, k as u64).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
