//! The single randomness source of a run.
//!
//! Every run owns one ChaCha8 stream seeded from a 64-bit seed via
//! `rand_chacha::ChaCha8Rng::seed_from_u64`. The algorithm name and seed are
//! written into run metadata so a run can be replayed bit-exactly.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";

#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` derived from the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SimRng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Bernoulli trial. Consumes exactly one `u64` draw whatever `p` is:
    /// the top 53 bits form a uniform `u` in `[0, 1)` and the result is
    /// `u < p`.
    ///
    /// `p` must lie in `[0, 1]`; callers clamp first.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
        self.uniform() < p
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_probabilities() {
        let mut rng = SimRng::new(7);
        assert!((0..10_000).all(|_| !rng.bernoulli(0.0)));
        assert!((0..10_000).all(|_| rng.bernoulli(1.0)));
    }

    #[test]
    fn one_draw_per_trial() {
        let mut a = SimRng::new(11);
        let mut b = SimRng::new(11);
        a.bernoulli(0.0);
        a.bernoulli(1.0);
        a.bernoulli(0.3);
        for _ in 0..3 {
            b.next_u64();
        }
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn half_probability_frequency() {
        let mut rng = SimRng::new(42);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| rng.bernoulli(0.5)).count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.002, "frac = {frac}");
    }

    #[test]
    fn frequency_within_four_sigma() {
        let mut rng = SimRng::new(3);
        let n = 200_000;
        for p in [0.01, 0.04, 0.2, 0.4, 0.9] {
            let hits = (0..n).filter(|_| rng.bernoulli(p)).count();
            let frac = hits as f64 / n as f64;
            let bound = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((frac - p).abs() < bound, "p={p} frac={frac}");
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = SimRng::new(99);
        let mut b = SimRng::new(99);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let mut c = SimRng::with_stream(99, 1);
        assert_ne!(xs[0], c.next_u64());
    }
}
