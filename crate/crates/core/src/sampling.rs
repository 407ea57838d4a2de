//! Seeded sample generation. The same seed always yields the same samples.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metric::TangentSample;

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn in_box(&mut self, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        lo.iter().zip(hi).map(|(&a, &b)| self.uniform(a, b)).collect()
    }

    /// Uniform direction on the Euclidean unit sphere.
    pub fn direction(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| self.uniform(-1.0, 1.0)).collect();
            let r2: f64 = v.iter().map(|c| c * c).sum();
            if r2 > 1e-4 && r2 <= 1.0 {
                let r = libm::sqrt(r2);
                return v.into_iter().map(|c| c / r).collect();
            }
        }
    }

    /// Tangent samples with base points in the box and directions scaled
    /// by a random factor in `[0.1, 3]`.
    pub fn tangent_samples(&mut self, lo: &[f64], hi: &[f64], count: usize) -> Vec<TangentSample> {
        (0..count)
            .map(|_| {
                let x = self.in_box(lo, hi);
                let scale = self.uniform(0.1, 3.0);
                let v: Vec<f64> = self.direction(lo.len()).into_iter().map(|c| c * scale).collect();
                TangentSample { x, v }
            })
            .collect()
    }
}
