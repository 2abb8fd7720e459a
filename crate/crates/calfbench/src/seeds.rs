//! Deterministic derivation of independent random streams.
//!
//! Every stochastic component (critic restart perturbations, exploration
//! noise, process noise, bootstrap resampling) draws from its own stream,
//! derived from a root seed and a fixed label. Adding a new noise source
//! therefore never perturbs existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from a root seed and a stream label.
pub fn child_seed(root: u64, label: &str) -> u64 {
    splitmix64(splitmix64(root) ^ fnv1a64(label.as_bytes()))
}

/// Derives an independent, reproducible random stream.
pub fn stream(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(root, label))
}
