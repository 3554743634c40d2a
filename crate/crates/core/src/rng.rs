//! Deterministic, platform-independent randomness.
//!
//! Every sample in the pipeline is drawn from a [`ChaCha8Rng`] stream seeded
//! through [`fold_seed`], and all integer draws go through an explicit
//! rejection sampler over `next_u32`. Nothing here depends on pointer width
//! or std hashing, so the same master seed yields byte-identical datasets on
//! any platform — and the scheme is simple enough to document so that an
//! independent implementation can reproduce the streams:
//!
//! * `mix64` is the splitmix64 output function: add the golden-gamma constant
//!   `0x9E3779B97F4A7C15`, then xor-shift/multiply twice
//!   (`0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`) and a final xor-shift.
//!   `mix64(0) == 0xE220A8397B1DCDAF` (the published reference vector).
//! * `fold_seed(master, parts)` is `mix64(master)` followed by
//!   `s = mix64(s ^ part)` for each part in order.
//! * derived seeds feed `ChaCha8Rng::seed_from_u64`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The splitmix64 output function (see module docs for the exact definition).
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of key parts into a master seed, one `mix64` round per
/// part. Used to give every instance (and every auxiliary stream) its own
/// independent, documented seed.
pub fn fold_seed(master: u64, parts: &[u64]) -> u64 {
    let mut s = mix64(master);
    for &p in parts {
        s = mix64(s ^ p);
    }
    s
}

/// The stream cipher RNG used everywhere. ChaCha output is defined bytewise,
/// so streams are identical across platforms.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from `0..n` by rejection sampling over `next_u32`; unbiased,
/// and independent of the platform's `usize` width.
///
/// Panics if `n == 0`.
pub fn uniform(rng: &mut impl RngCore, n: u32) -> u32 {
    assert!(n > 0, "empty range");
    // Accept only draws below the largest multiple of n that fits in 2^32.
    let limit = ((1u64 << 32) / u64::from(n)) * u64::from(n);
    loop {
        let v = rng.next_u32();
        if u64::from(v) < limit {
            return v % n;
        }
    }
}

/// `uniform` for slice indexing. Panics on an empty slice or if the length
/// exceeds `u32::MAX` (no collection here comes close).
pub fn index(rng: &mut impl RngCore, len: usize) -> usize {
    let n = u32::try_from(len).expect("collection too large to sample");
    uniform(rng, n) as usize
}

/// Picks one element uniformly.
pub fn choose<'a, T>(rng: &mut impl RngCore, items: &'a [T]) -> &'a T {
    &items[index(rng, items.len())]
}

/// Fair coin.
pub fn coin(rng: &mut impl RngCore) -> bool {
    rng.next_u32() & 1 == 1
}

/// Fisher–Yates shuffle driven by [`uniform`].
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}
