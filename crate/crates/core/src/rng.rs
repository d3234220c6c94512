//! Seeded random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

/// A seeded random stream. Identical seeds yield identical sequences.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            counter: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent child stream, keyed by `tag`.
    pub fn fork(&self, tag: u64) -> Self {
        let mixed = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9))
            ^ 0x94D0_49BB_1331_11EB;
        Self::new(mixed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of draws taken so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn normal<T: Scalar>(&mut self) -> T {
        self.counter += 1;
        let v: f64 = StandardNormal.sample(&mut self.rng);
        T::of(v)
    }

    pub fn normal_vec<T: Scalar>(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.counter += 1;
        self.rng.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(7);
        let mut b = RngStream::new(7);
        let xa: Vec<f64> = a.normal_vec(32);
        let xb: Vec<f64> = b.normal_vec(32);
        assert_eq!(xa, xb);
        assert_eq!(a.counter(), 32);
    }

    #[test]
    fn forks_differ() {
        let base = RngStream::new(1);
        let mut f1 = base.fork(1);
        let mut f2 = base.fork(2);
        assert_ne!(f1.next_u64(), f2.next_u64());
    }
}
