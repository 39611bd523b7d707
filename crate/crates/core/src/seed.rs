//! Deterministic seed derivation so every stream (trees, iterations, trials)
//! is fixed up front and independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` of `parent`.
pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Child seed for a path of indices, e.g. `(home, trial)`.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |s, &i| derive(s, i))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
