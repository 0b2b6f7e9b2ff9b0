//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by the run
//! seed plus a label describing what the stream is for, so results never
//! depend on the order in which unrelated components consume randomness.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Stable 64-bit FNV-1a over a sequence of byte strings (length-prefixed so
/// `["ab", "c"]` and `["a", "bc"]` differ).
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for b in (part.len() as u64).to_le_bytes().iter().chain(part.iter()) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator keyed by `(seed, label parts)`.
pub fn stream(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed) ^ stable_hash(parts))
}

pub fn uniform_vec<R: Rng>(rng: &mut R, len: usize, range: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-range..=range)).collect()
}

/// Deterministic vector in `[-1, 1]^dim` for an arbitrary key.
pub fn keyed_uniform(seed: u64, parts: &[&[u8]], dim: usize) -> Vec<f64> {
    uniform_vec(&mut stream(seed, parts), dim, 1.0)
}
