//! Seedable, portable randomness with one named stream per purpose.
//!
//! All generators in the crate are `ChaCha8Rng` instances keyed by
//! `(seed, stream)`, so the data stream, the split stream, the init stream and
//! so on never interleave: adding draws to one purpose cannot perturb another.
//! Per-sample draws (augmentation noise) use `derive_seed` to fold indices into
//! a fresh 64-bit seed, keeping them stable under pool reordering.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_DATA: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_OUTLIERS: u64 = 3;
pub const STREAM_INIT: u64 = 4;
pub const STREAM_AUGMENT: u64 = 5;
/// Minibatch shuffling inside the training loop.
pub const STREAM_SHUFFLE: u64 = 6;

/// RNG for one purpose of one run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; full-period bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold `parts` (iteration counters, sample indices, ...) into `seed`,
/// producing an independent per-item seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(seed), |acc, &p| {
        mix(acc ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    })
}
