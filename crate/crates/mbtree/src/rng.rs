//! Deterministic random-number streams.
//!
//! All samplers in this crate draw from [`RngStream`], a ChaCha8 generator
//! keyed by a 64-bit seed. Monte-Carlo replicates use
//! [`RngStream::replicate`], which keeps the master seed as the cipher key
//! and selects the ChaCha stream counter by replicate index, so replicate
//! `i` produces the same draws no matter how work is split across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Master stream for a seed (stream counter 0).
    pub fn new(seed: u64) -> Self {
        RngStream { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for one Monte-Carlo replicate: same key as
    /// `new(seed)`, ChaCha stream counter `index + 1` (counter 0 is the
    /// master stream).
    pub fn replicate(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index.wrapping_add(1));
        RngStream { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.rng.gen::<f64>();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Standard exponential via inversion.
    pub fn exponential(&mut self) -> f64 {
        -self.uniform_open().ln()
    }

    /// Index drawn proportionally to the (non-negative) weights.
    pub fn pick_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0, "pick_weighted needs positive total weight");
        let mut u = self.uniform() * total;
        for (i, w) in weights.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }

    /// Bernoulli with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via the polar method.
    pub fn normal(&mut self) -> f64 {
        loop {
            let x = 2.0 * self.uniform() - 1.0;
            let y = 2.0 * self.uniform() - 1.0;
            let s = x * x + y * y;
            if 0.0 < s && s < 1.0 {
                return x * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// Gamma with the given shape and unit rate (Marsaglia-Tsang squeeze;
    /// shapes below one are boosted through `G(a) = G(a + 1) U^(1/a)`).
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape > 0.0, "gamma needs a positive shape");
        if shape < 1.0 {
            return self.gamma(shape + 1.0) * self.uniform_open().powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.normal();
            let v = 1.0 + c * z;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform_open();
            if u < 1.0 - 0.0331 * z.powi(4) || u.ln() < 0.5 * z * z + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Dirichlet draw with the given positive weights (normalized gammas).
    pub fn dirichlet(&mut self, weights: &[f64]) -> Vec<f64> {
        let gs: Vec<f64> = weights.iter().map(|&a| self.gamma(a)).collect();
        let total: f64 = gs.iter().sum();
        gs.into_iter().map(|g| g / total).collect()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn replicates_are_distinct_and_reproducible() {
        let mut r0 = RngStream::replicate(7, 0);
        let mut r1 = RngStream::replicate(7, 1);
        let x0 = r0.uniform();
        let x1 = r1.uniform();
        assert_ne!(x0.to_bits(), x1.to_bits());
        let mut again = RngStream::replicate(7, 1);
        assert_eq!(again.uniform().to_bits(), x1.to_bits());
    }

    #[test]
    fn gamma_matches_first_two_moments() {
        let mut rng = RngStream::new(5);
        for shape in [0.4, 1.0, 2.7] {
            let m = 20_000;
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..m {
                let g = rng.gamma(shape);
                assert!(g > 0.0);
                sum += g;
                sum_sq += g * g;
            }
            let mean = sum / m as f64;
            let var = sum_sq / m as f64 - mean * mean;
            // E = shape, Var = shape; allow five-ish standard errors
            assert!((mean - shape).abs() < 5.0 * (shape / m as f64).sqrt() + 0.01);
            assert!((var - shape).abs() < 0.15 * shape.max(1.0));
        }
    }

    #[test]
    fn dirichlet_lands_in_the_simplex() {
        let mut rng = RngStream::new(6);
        let x = rng.dirichlet(&[0.5, 1.5, 2.0]);
        assert_eq!(x.len(), 3);
        assert!(x.iter().all(|&v| v > 0.0));
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_pick_hits_every_bucket() {
        let mut rng = RngStream::new(1);
        let w = [1.0, 2.0, 3.0];
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            seen[rng.pick_weighted(&w)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 0));
        // crude proportionality check: bucket 2 should dominate bucket 0
        assert!(seen[2] > seen[0]);
    }
}
