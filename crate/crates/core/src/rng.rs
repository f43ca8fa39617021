//! Portable seeded randomness.
//!
//! Every random draw in the crate goes through [`SeededRng`], a ChaCha8
//! stream keyed by a 64-bit seed. Floats are built from the top 53 bits of
//! each 64-bit output, so a given seed produces the same values on every
//! platform and every version of this crate. [`split`] derives independent
//! child seeds (one ChaCha stream per index) so that parallel jobs never
//! depend on scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]`; returns `lo` exactly when the interval is a point.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.unit();
        if lo == hi {
            lo
        } else {
            lo + (hi - lo) * u
        }
    }

    /// Uniform integer in `[lo, hi]` inclusive.
    pub fn int_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        lo + ((self.unit() * span as f64) as u64).min(span - 1)
    }

    pub fn index(&mut self, len: usize) -> usize {
        debug_assert!(len > 0);
        self.int_inclusive(0, len as u64 - 1) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

/// Child seed number `index` of `seed`.
pub fn split(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    // First outputs of the generator; these pin the stream across platforms.
    #[test]
    fn reference_vectors() {
        for (seed, first) in REFERENCE {
            assert_eq!(SeededRng::new(seed).next_u64(), first, "seed {seed}");
        }
    }

    const REFERENCE: [(u64, u64); 3] = [
        (0, 13080132717333068652),
        (1, 7424550030962593201),
        (42, 12578764544318200737),
    ];

    #[test]
    fn split_children_differ() {
        let a = split(7, 0);
        let b = split(7, 1);
        assert_ne!(a, b);
        assert_eq!(a, split(7, 0));
        assert_ne!(split(7, 0), split(8, 0));
    }

    #[test]
    fn point_interval_is_exact() {
        let mut rng = SeededRng::new(3);
        for _ in 0..100 {
            assert_eq!(rng.uniform(0.35, 0.35), 0.35);
        }
    }

    #[test]
    fn int_inclusive_covers_endpoints() {
        let mut rng = SeededRng::new(11);
        let mut seen = [false; 4];
        for _ in 0..1000 {
            seen[rng.int_inclusive(0, 3) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
