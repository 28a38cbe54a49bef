//! Seed-derived RNG streams.
//!
//! Every stochastic stage (RUS draw, SMOTE draw, bootstrap, tree growth,
//! fold shuffling) pulls from its own ChaCha8 stream derived from
//! `(seed, tag, index)`. Stages are therefore independently reproducible
//! and parallel execution cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive a child seed from `(seed, tag, index)`.
pub fn derive(seed: u64, tag: &str, index: u64) -> u64 {
    let mut state = splitmix64(seed);
    state = splitmix64(state ^ fnv1a64(tag.as_bytes()));
    splitmix64(state ^ index)
}

/// A ChaCha8 stream for the given `(seed, tag, index)` triple.
pub fn stream(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, index))
}
