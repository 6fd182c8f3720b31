//! Seeded, platform-stable random streams.
//!
//! All randomness in the toolkit flows through ChaCha8 streams keyed by a
//! 64-bit seed, so any experiment reproduces bit-for-bit from its seed.
//! Sub-streams (per cell, per trial, per shard) derive their seeds with
//! [`mix_seed`] rather than consuming a shared stream, which keeps parallel
//! schedules independent of thread count.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from a base seed and a list of coordinates.
///
/// SplitMix64-style finalizer; stable across platforms and releases of this
/// crate's dependencies (no hasher involved).
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Draw a standard Gaussian vector of length `len`.
pub fn standard_normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Choose `s` distinct indices from `0..d`, returned sorted.
///
/// Partial Fisher-Yates over an index array; consumes exactly `s` draws.
pub fn sample_support(rng: &mut ChaCha8Rng, d: usize, s: usize) -> Vec<usize> {
    assert!(s <= d, "support size {s} exceeds dimension {d}");
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..s {
        let j = rng.gen_range(i..d);
        idx.swap(i, j);
    }
    let mut out = idx[..s].to_vec();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_is_stable() {
        // Pin the mixer so seed schedules never drift silently.
        assert_eq!(mix_seed(0, &[]), 0x9E37_79B9_7F4A_7C15);
        assert_ne!(mix_seed(1, &[2, 3]), mix_seed(1, &[3, 2]));
        assert_eq!(mix_seed(7, &[1, 2]), mix_seed(7, &[1, 2]));
    }

    #[test]
    fn support_is_sorted_and_distinct() {
        let mut rng = rng_from_seed(11);
        for _ in 0..50 {
            let s = sample_support(&mut rng, 20, 7);
            assert_eq!(s.len(), 7);
            for w in s.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn streams_reproduce() {
        let a = standard_normal_vector(&mut rng_from_seed(42), 16);
        let b = standard_normal_vector(&mut rng_from_seed(42), 16);
        assert_eq!(a, b);
    }
}
