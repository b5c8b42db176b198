//! Seed handling.
//!
//! Every random quantity in the crate is drawn from a [`LabRng`] built from a
//! 64-bit seed. Independent sub-streams (per grid cell, per trial, per oracle)
//! are obtained with [`derive_seed`], which folds a path of integer keys into
//! the master seed with the SplitMix64 finalizer:
//!
//! ```text
//! h0 = mix(master)
//! h_{i+1} = mix(h_i ^ (key_i + 0x9E3779B97F4A7C15 * (i + 1)))
//! ```
//!
//! The derived seed depends only on the master seed and the key path, so grid
//! cells and trials can be evaluated in any order (or concurrently) with
//! identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate. ChaCha8 has a value-stable output
/// stream across platforms and crate versions.
pub type LabRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from `master` and a key path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix(master);
    for (i, &key) in path.iter().enumerate() {
        h = mix(h ^ key.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
    }
    h
}

pub fn rng_from_seed(seed: u64) -> LabRng {
    LabRng::seed_from_u64(seed)
}

/// Stable 64-bit tag for a string key (FNV-1a), for use in seed paths.
pub fn key_of(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
