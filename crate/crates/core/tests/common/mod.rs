#![allow(dead_code)]

use fredinfo::spectral_models::{CoefficientVector, SpectrumModel};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize % n
    }

    /// Box–Muller standard normal.
    pub fn normal(&mut self) -> f64 {
        let (u, v) = (self.uniform(), self.uniform());
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    /// Uniform point in the ball of the given radius.
    pub fn ball(&mut self, dim: usize, radius: f64) -> Vec<f64> {
        let mut x: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = radius * self.uniform().powf(1.0 / dim as f64);
        for v in &mut x {
            *v *= r / norm;
        }
        x
    }

    /// Log-uniform on `[lo, hi]`.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * self.uniform()).exp()
    }
}

/// The three built-in operators at their default sizes.
pub fn builtin_models() -> Vec<SpectrumModel> {
    vec![
        SpectrumModel::poisson(0.5, 1.0).unwrap(),
        SpectrumModel::heat(1.0, 2.0, 1.0).unwrap(),
        SpectrumModel::green(),
    ]
}

/// A coefficient vector of `model` filled from `entries` in layout order.
pub fn vector(model: &SpectrumModel, entries: Vec<f64>) -> CoefficientVector {
    CoefficientVector::zeros(model).with_entries(entries).unwrap()
}

pub fn dim(model: &SpectrumModel) -> usize {
    CoefficientVector::zeros(model).len()
}
