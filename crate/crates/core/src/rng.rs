//! Seed derivation. Every random stage draws from its own ChaCha stream
//! keyed by `(seed, tag)`, so results never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_tag(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Child seed for a named stage.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    mix64(seed ^ mix64(hash_tag(tag)))
}

pub fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Uniform value in `[0, 1)` determined only by `(seed, a, b)`.
pub fn hash_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let h = mix64(seed ^ mix64(a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ mix64(b)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
