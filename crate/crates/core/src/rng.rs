//! Seed derivation for reproducible, order-independent random streams.
//!
//! One master seed drives every experiment. Anything that needs its own
//! stream (a sample index, a Monte-Carlo chunk, a denoiser query) derives a
//! substream seed as `stream_seed(master, index)`, a SplitMix64 mix of the
//! master seed and the index. Substreams are independent of evaluation order,
//! so parallel loops reproduce the sequential results exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// SplitMix64 finalizer. Bijective on `u64`, good avalanche.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for substream `index` of `master`: `splitmix64(splitmix64(master) ^ index)`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

/// The generator behind every seeded draw in the crate.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a over raw bytes; used for content hashes and query keys.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// FNV-1a over the IEEE-754 bit patterns of a float slice.
pub fn hash_f64s(seed: u64, values: &[f64]) -> u64 {
    let mut h = splitmix64(seed ^ 0xf1ea_5eed_f00d_cafe);
    for v in values {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Fill `out` with standard-normal draws from `rng`.
pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// `len` standard-normal draws from the stream for `seed`.
pub fn standard_normal_vec(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = rng_from(seed);
    let mut out = vec![0.0; len];
    fill_standard_normal(&mut rng, &mut out);
    out
}
