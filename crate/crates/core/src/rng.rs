//! Seeded randomness shared by every stochastic stage.
//!
//! The generator is ChaCha8 (`rand_chacha`). A `(seed, stream)` pair selects
//! the key via `SeedableRng::seed_from_u64(seed)` and the ChaCha stream id
//! via `set_stream(stream)`, so independent stages draw from independent
//! streams of the same key. Derived draws are fixed here rather than taken
//! from `rand` so other implementations can reproduce them:
//!
//! - `uniform()`: `(next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`.
//! - `below(n)`: rejection sampling on `next_u64` against the largest
//!   multiple of `n`, then `value % n`.
//! - `shuffle`: Fisher-Yates from the last index down, swapping `i` with
//!   `below(i + 1)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream ids used by the pipeline stages.
pub mod streams {
    pub const PARTITION: u64 = 1;
    pub const SMOTE: u64 = 2;
    pub const ISOLATION_FOREST: u64 = 3;
    pub const CV_FOLDS: u64 = 4;
    pub const LEAKAGE_SAFE: u64 = 5;
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// A child generator on the same key but a distinct stream.
    pub fn split(seed: u64, stream: u64, child: u64) -> Self {
        Self::new(seed, stream.wrapping_mul(0x1_0000).wrapping_add(child))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
