use serde::{Deserialize, Serialize};

use super::{check_finite, check_len, Classifier};
use crate::error::Result;

/// Multi-class logistic regression: logits `W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSoftmaxModel {
    pub m: usize,
    pub d: usize,
    /// Row-major `m x d`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearSoftmaxModel {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            m,
            d,
            w: vec![0.0; m * d],
            b: vec![0.0; m],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], b: Vec<f64>) -> Self {
        let m = rows.len();
        let d = rows[0].len();
        Self {
            m,
            d,
            w: rows.concat(),
            b,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.d..(i + 1) * self.d]
    }

    pub fn validate(&self) -> Result<()> {
        check_len("w", &self.w, self.m * self.d)?;
        check_len("b", &self.b, self.m)?;
        check_finite("w", &self.w)?;
        check_finite("b", &self.b)
    }
}

impl Classifier for LinearSoftmaxModel {
    fn m(&self) -> usize {
        self.m
    }

    fn d(&self) -> usize {
        self.d
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d, "input dimension");
        (0..self.m)
            .map(|i| {
                self.b[i]
                    + self
                        .row(i)
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect()
    }

    fn logit_vjp(&self, x: &[f64], coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d, "input dimension");
        let mut g = vec![0.0; self.d];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (gk, wk) in g.iter_mut().zip(self.row(i)) {
                *gk += c * wk;
            }
        }
        g
    }
}
