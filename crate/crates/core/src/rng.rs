//! Counter-based seed derivation.
//!
//! Every sampled function is identified by a 64-bit draw index. Generators are
//! seeded from the draw alone, so tables can be built in any order or in
//! parallel and still produce identical functions.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `seed`.
#[inline]
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(GOLDEN)))
}

pub type DrawRng = Xoshiro256PlusPlus;

pub fn rng_for(draw: u64) -> DrawRng {
    Xoshiro256PlusPlus::seed_from_u64(draw)
}

pub fn gaussian_vec(rng: &mut DrawRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform index in `[0, k)` from a 64-bit value (multiply-shift).
#[inline]
pub fn pick_index(value: u64, k: usize) -> usize {
    ((value as u128 * k as u128) >> 64) as usize
}
