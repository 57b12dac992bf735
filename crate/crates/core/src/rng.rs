//! Seeded random number generation.
//!
//! Every random choice in the pipeline draws from ChaCha with 8 rounds
//! (`rand_chacha::ChaCha8Rng`). The 64-bit user seed is expanded into the
//! 256-bit ChaCha key by `SeedableRng::seed_from_u64`, which runs PCG32 with
//! multiplier `6364136223846793005` and increment `11634580027462260723`.
//! Independent sub-streams (one per language, fold, ...) select the ChaCha
//! stream word with [`ChaCha8Rng::set_stream`], so they never overlap.
//!
//! ChaCha output does not depend on pointer width or endianness, and all
//! integer ranges are sampled as `u64`, so a seed produces the same draws on
//! every platform.

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Generator for `seed`, stream 0.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `seed` on an independent stream.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform index in `0..len`. `len` must be non-zero.
pub fn index(rng: &mut impl Rng, len: usize) -> usize {
    rng.random_range(0..len as u64) as usize
}

/// Fisher-Yates shuffle driven by [`index`].
pub fn shuffle<T>(rng: &mut impl Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}
