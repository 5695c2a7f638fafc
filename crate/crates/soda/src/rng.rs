//! Seeded randomness.
//!
//! Every random choice in this crate flows from a single 64-bit seed through
//! ChaCha8, so runs are bit-reproducible across platforms. Derived streams
//! (one per trial, per deviation, ...) are split off with SplitMix64 so that
//! parallel trials never share state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The one PRNG used everywhere.
pub type SeededRng = ChaCha8Rng;

/// Stream tags for [`derive_seed`]. Distinct tags keep derived streams for
/// different purposes independent even at equal indices.
pub mod stream {
    pub const MARKET: u64 = 1;
    pub const TRIAL: u64 = 2;
    pub const DEVIATION: u64 = 3;
    pub const PERMUTATION: u64 = 4;
    pub const PROCESS: u64 = 5;
}

pub fn rng_from(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; good avalanche, stable forever.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive an independent seed from a base seed, a stream tag, and an index.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ stream.wrapping_mul(0xa076_1d64_78bd_642f)).wrapping_add(index))
}

/// Uniform draw in `0..bound` by rejection; self-contained so the byte stream
/// never depends on the rand crate's internal sampling strategy.
pub fn uniform_u64(rng: &mut SeededRng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return v % bound;
        }
    }
}

pub fn uniform_usize(rng: &mut SeededRng, bound: usize) -> usize {
    uniform_u64(rng, bound as u64) as usize
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub fn unit_f64(rng: &mut SeededRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut SeededRng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_usize(rng, i + 1);
        items.swap(i, j);
    }
}

/// Shuffle only the first `k` positions (uniform k-prefix of a random
/// permutation); the tail is left partially mixed and should be ignored.
pub fn partial_shuffle<T>(rng: &mut SeededRng, items: &mut [T], k: usize) {
    let n = items.len();
    for i in 0..k.min(n.saturating_sub(1)) {
        let j = i + uniform_usize(rng, n - i);
        items.swap(i, j);
    }
}
