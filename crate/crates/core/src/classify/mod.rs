//! Differentiable classifiers used by both the defender and the attacker,
//! plus the non-differentiable attack variants built on top of them.

mod linear;
mod mlp;
mod robust;
mod train;

pub use linear::LinearSoftmaxModel;
pub use mlp::MlpModel;
pub use robust::{adversarial_training, baseline_most_popular, region_based_predict, MostPopular, RegionClassifier};
pub use train::{mean_loss, train_linear, train_mlp, TrainConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::domain::Label;
use crate::error::{Error, Result};

/// A model with differentiable logits. Decision scores are the softmax of
/// the logits.
pub trait Classifier: Send + Sync {
    fn m(&self) -> usize;
    fn d(&self) -> usize;

    fn logits(&self, x: &[f64]) -> Vec<f64>;

    /// `sum_j coeffs[j] * d logit_j / d x`.
    fn logit_vjp(&self, x: &[f64], coeffs: &[f64]) -> Vec<f64>;

    fn decision_scores(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    fn predict(&self, x: &[f64]) -> Label {
        argmax(&self.logits(x))
    }

    /// Gradient of the logit of label `i`.
    fn logit_gradient(&self, x: &[f64], i: Label) -> Vec<f64> {
        let mut e = vec![0.0; self.m()];
        e[i] = 1.0;
        self.logit_vjp(x, &e)
    }

    /// Gradient of the decision score `C_i(x)`.
    fn input_gradient(&self, x: &[f64], i: Label) -> Vec<f64> {
        let c = self.decision_scores(x);
        // dC_i/dz_j = C_i (delta_ij - C_j)
        let coeffs: Vec<f64> = (0..self.m())
            .map(|j| c[i] * (f64::from(u8::from(i == j)) - c[j]))
            .collect();
        self.logit_vjp(x, &coeffs)
    }
}

/// Anything that maps a user's public vector to a label. The user id lets
/// randomized predictors draw from a per-user stream.
pub trait Predictor: Sync {
    fn predict_row(&self, user_id: &str, x: &[f64]) -> Label;
}

impl<C: Classifier> Predictor for C {
    fn predict_row(&self, _user_id: &str, x: &[f64]) -> Label {
        self.predict(x)
    }
}

/// Fraction of labeled rows the predictor gets right.
pub fn accuracy<P: Predictor + ?Sized>(predictor: &P, ds: &Dataset) -> Result<f64> {
    let labels = ds.labels()?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct: usize = ds
        .rows()
        .par_iter()
        .zip(labels.par_iter())
        .filter(|(row, &label)| predictor.predict_row(&row.user_id, &row.x) == label)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// A serializable trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearSoftmaxModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Linear(l) => l.validate(),
            Model::Mlp(n) => n.validate(),
        }
    }
}

impl Classifier for Model {
    fn m(&self) -> usize {
        match self {
            Model::Linear(l) => l.m(),
            Model::Mlp(n) => n.m(),
        }
    }

    fn d(&self) -> usize {
        match self {
            Model::Linear(l) => l.d(),
            Model::Mlp(n) => n.d(),
        }
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Model::Linear(l) => l.logits(x),
            Model::Mlp(n) => n.logits(x),
        }
    }

    fn logit_vjp(&self, x: &[f64], coeffs: &[f64]) -> Vec<f64> {
        match self {
            Model::Linear(l) => l.logit_vjp(x, coeffs),
            Model::Mlp(n) => n.logit_vjp(x, coeffs),
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} has non-finite entries")))
    }
}

fn check_len(name: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} has {} entries, expected {expected}",
            v.len()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 0.0]), 0);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
        assert_eq!(argmax(&[0.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn argmax_agrees_with_scan_and_shift() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let v: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let best = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let scan = v.iter().position(|&x| x == best).unwrap();
            assert_eq!(argmax(&v), scan);
            let shifted: Vec<f64> = v.iter().map(|x| x + 17.0).collect();
            assert_eq!(argmax(&shifted), scan);
        }
    }

    #[test]
    fn model_json_roundtrip_is_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut model = LinearSoftmaxModel::zeros(3, 4);
        for w in model.w.iter_mut().chain(model.b.iter_mut()) {
            *w = rng.random_range(-1.0..1.0) / 3.0;
        }
        let m = Model::Linear(model);
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);

        let nn = MlpModel::init(5, 3, 2, &mut rng);
        let m = Model::Mlp(nn);
        let json = m.to_json().unwrap();
        assert!(json.starts_with(r#"{"kind":"mlp","m":2,"d":5,"h":3"#), "{json}");
        assert_eq!(Model::from_json(&json).unwrap(), m);
    }

    #[test]
    fn model_json_rejects_bad_shapes() {
        let bad = r#"{"kind":"linear","m":2,"d":2,"w":[1.0,2.0,3.0],"b":[0.0,0.0]}"#;
        assert!(Model::from_json(bad).is_err());
    }
}
