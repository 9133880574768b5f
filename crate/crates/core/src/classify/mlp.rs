use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, check_len, Classifier};
use crate::error::Result;

/// Three-layer network: `W2 relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub m: usize,
    pub d: usize,
    pub h: usize,
    /// Row-major `h x d`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `m x h`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpModel {
    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init<R: Rng>(d: usize, h: usize, m: usize, rng: &mut R) -> Self {
        let a1 = 1.0 / (d as f64).sqrt();
        let a2 = 1.0 / (h as f64).sqrt();
        Self {
            m,
            d,
            h,
            w1: (0..h * d).map(|_| rng.random_range(-a1..=a1)).collect(),
            b1: vec![0.0; h],
            w2: (0..m * h).map(|_| rng.random_range(-a2..=a2)).collect(),
            b2: vec![0.0; m],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_len("w1", &self.w1, self.h * self.d)?;
        check_len("b1", &self.b1, self.h)?;
        check_len("w2", &self.w2, self.m * self.h)?;
        check_len("b2", &self.b2, self.m)?;
        for (name, v) in [("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)] {
            check_finite(name, v)?;
        }
        Ok(())
    }

    /// Hidden pre-activations `W1 x + b1`.
    pub fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d, "input dimension");
        let mut z = self.b1.clone();
        // x is sparse in practice, so walk it column-wise.
        for (k, &v) in x.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += self.w1[j * self.d + k] * v;
            }
        }
        z
    }

    pub(crate) fn output(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                self.b2[i]
                    + self.w2[i * self.h..(i + 1) * self.h]
                        .iter()
                        .zip(hidden)
                        .map(|(w, a)| w * a)
                        .sum::<f64>()
            })
            .collect()
    }
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

impl Classifier for MlpModel {
    fn m(&self) -> usize {
        self.m
    }

    fn d(&self) -> usize {
        self.d
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.output(&relu(&self.hidden_pre(x)))
    }

    fn logit_vjp(&self, x: &[f64], coeffs: &[f64]) -> Vec<f64> {
        let z = self.hidden_pre(x);
        let mut g = vec![0.0; self.d];
        for (j, &zj) in z.iter().enumerate() {
            // relu'(0) = 0
            if zj <= 0.0 {
                continue;
            }
            let back: f64 = (0..self.m).map(|i| coeffs[i] * self.w2[i * self.h + j]).sum();
            if back == 0.0 {
                continue;
            }
            for (gk, wk) in g.iter_mut().zip(&self.w1[j * self.d..(j + 1) * self.d]) {
                *gk += back * wk;
            }
        }
        g
    }
}
