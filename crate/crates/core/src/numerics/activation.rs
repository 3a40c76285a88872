use rand::Rng;
use serde::{Deserialize, Serialize};

use super::random::rng_from_seed;

/// Pointwise activation σ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    pub fn apply(self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| self.eval(x)).collect()
    }

    #[inline]
    pub fn apply_in_place(self, v: &mut [f64]) {
        if self == Activation::Identity {
            return;
        }
        for x in v {
            *x = self.eval(*x);
        }
    }

    pub fn is_identity(self) -> bool {
        self == Activation::Identity
    }
}

pub fn apply_activation(a: Activation, v: &[f64]) -> Vec<f64> {
    a.apply(v)
}

/// Sampled check of ⟨σ(x) − σ(y), x − y⟩ ≥ 0 for a pointwise map over `[lo, hi]`.
pub fn monotonicity_probe_fn(f: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize, seed: u64) -> bool {
    const DIM: usize = 4;
    let mut rng = rng_from_seed(seed);
    for _ in 0..samples.max(1) {
        let x: Vec<f64> = (0..DIM).map(|_| rng.random_range(lo..=hi)).collect();
        let y: Vec<f64> = (0..DIM).map(|_| rng.random_range(lo..=hi)).collect();
        let inner: f64 = x.iter().zip(&y).map(|(&a, &b)| (f(a) - f(b)) * (a - b)).sum();
        if inner < 0.0 {
            return false;
        }
    }
    true
}

/// Monotonicity probe for one of the built-in activations on `[-6, 6]`.
pub fn monotonicity_probe(a: Activation, samples: usize, seed: u64) -> bool {
    monotonicity_probe_fn(|x| a.eval(x), -6.0, 6.0, samples, seed)
}
