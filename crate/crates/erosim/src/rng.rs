//! Seed derivation and a buffered source of fair coin flips.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Derives the seed for one trial from a master seed and a trial index.
///
/// SplitMix64 step: the index advances the state by the golden-ratio
/// increment, so consecutive trial indices map to well-separated seeds.
pub fn mix_seed(master_seed: u64, trial_index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(trial_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A ChaCha8-backed stream of fair bits, refilled 64 at a time.
///
/// A single ±1 walk step costs a shift and a branch on average; the generator
/// runs once per 64 steps. The buffer is part of the serialized state so a
/// resumed run consumes exactly the same bit sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BitSource {
    rng: ChaCha8Rng,
    buf: u64,
    left: u8,
}

impl BitSource {
    pub fn new(seed: u64) -> Self {
        BitSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: 0,
            left: 0,
        }
    }

    #[inline(always)]
    pub fn next_bit(&mut self) -> bool {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        bit
    }

    /// ±1 step with equal probability.
    #[inline(always)]
    pub fn step(&mut self) -> i64 {
        if self.next_bit() {
            1
        } else {
            -1
        }
    }

    /// Direct access for non-bit draws (endpoint sampling, uniform indices).
    /// Mixing buffered bits and direct draws keeps determinism: the consumed
    /// stream depends only on the call sequence.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_seed_separates_indices() {
        let s: Vec<u64> = (0..100).map(|i| mix_seed(42, i)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
        // different masters diverge too
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
    }

    #[test]
    fn bits_are_deterministic() {
        let mut a = BitSource::new(7);
        let mut b = BitSource::new(7);
        for _ in 0..1000 {
            assert_eq!(a.next_bit(), b.next_bit());
        }
    }

    #[test]
    fn bits_are_roughly_balanced() {
        let mut src = BitSource::new(0);
        let ones: u64 = (0..1_000_000).filter(|_| src.next_bit()).count() as u64;
        // 5 sigma band around the mean of Binomial(1e6, 1/2)
        assert!((ones as i64 - 500_000).abs() < 2_500);
    }

    #[test]
    fn serialization_round_trips_mid_buffer() {
        let mut src = BitSource::new(3);
        for _ in 0..37 {
            src.next_bit();
        }
        let json = serde_json::to_string(&src).unwrap();
        let mut copy: BitSource = serde_json::from_str(&json).unwrap();
        for _ in 0..200 {
            assert_eq!(src.next_bit(), copy.next_bit());
        }
    }
}
