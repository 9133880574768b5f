//! Mini-batch gradient descent on mean cross-entropy plus an L2 penalty on
//! the weight matrices (biases are not penalized).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{softmax, Classifier, LinearSoftmaxModel, MlpModel};
use crate::dataset::Dataset;
use crate::domain::Label;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.5,
            l2_penalty: 1e-2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(self.l2_penalty >= 0.0) {
            return Err(Error::InvalidConfig("l2_penalty must be >= 0".into()));
        }
        Ok(())
    }
}

fn labeled(ds: &Dataset) -> Result<Vec<Label>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if ds.m() < 2 {
        return Err(Error::InvalidConfig("need m >= 2 labels".into()));
    }
    ds.labels()
}

/// Yields the row order for every epoch.
fn epoch_orders(n: usize, cfg: &TrainConfig, stage: &str) -> impl Iterator<Item = Vec<usize>> {
    let mut rng = SeedSpec::new(cfg.seed).stream(stage);
    (0..cfg.epochs).map(move |_| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
    })
}

/// Nonzero `(index, value)` pairs of every row.
fn sparse_rows(ds: &Dataset) -> Vec<Vec<(usize, f64)>> {
    ds.rows()
        .iter()
        .map(|r| r.x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, &v)| (k, v)).collect())
        .collect()
}

pub fn train_linear(ds: &Dataset, cfg: &TrainConfig) -> Result<LinearSoftmaxModel> {
    cfg.validate()?;
    let labels = labeled(ds)?;
    let (d, m) = (ds.d(), ds.m());
    let sparse = sparse_rows(ds);
    let mut model = LinearSoftmaxModel::zeros(d, m);
    let mut gw = vec![0.0; m * d];
    let mut gb = vec![0.0; m];
    for order in epoch_orders(ds.len(), cfg, "train-linear") {
        for batch in order.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &r in batch {
                let x = &ds.rows()[r].x;
                let mut delta = model.decision_scores(x);
                delta[labels[r]] -= 1.0;
                for i in 0..m {
                    gb[i] += delta[i];
                    for &(k, v) in &sparse[r] {
                        gw[i * d + k] += delta[i] * v;
                    }
                }
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            let decay = 2.0 * cfg.l2_penalty * cfg.learning_rate;
            for (w, g) in model.w.iter_mut().zip(&gw) {
                *w -= scale * g + decay * *w;
            }
            for (b, g) in model.b.iter_mut().zip(&gb) {
                *b -= scale * g;
            }
        }
    }
    Ok(model)
}

pub fn train_mlp(ds: &Dataset, cfg: &TrainConfig, hidden: usize) -> Result<MlpModel> {
    cfg.validate()?;
    if hidden == 0 {
        return Err(Error::InvalidConfig("hidden width must be >= 1".into()));
    }
    let labels = labeled(ds)?;
    let (d, m, h) = (ds.d(), ds.m(), hidden);
    let sparse = sparse_rows(ds);
    let mut model = MlpModel::init(d, h, m, &mut SeedSpec::new(cfg.seed).stream("mlp-init"));
    let mut gw1 = vec![0.0; h * d];
    let mut gb1 = vec![0.0; h];
    let mut gw2 = vec![0.0; m * h];
    let mut gb2 = vec![0.0; m];
    for order in epoch_orders(ds.len(), cfg, "train-mlp") {
        for batch in order.chunks(cfg.batch_size) {
            for g in [&mut gw1, &mut gb1, &mut gw2, &mut gb2] {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            for &r in batch {
                let x = &ds.rows()[r].x;
                let z = model.hidden_pre(x);
                let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
                let mut delta = softmax(&model.output(&a));
                delta[labels[r]] -= 1.0;
                for i in 0..m {
                    gb2[i] += delta[i];
                    for j in 0..h {
                        gw2[i * h + j] += delta[i] * a[j];
                    }
                }
                for j in 0..h {
                    if z[j] <= 0.0 {
                        continue;
                    }
                    let back: f64 = (0..m).map(|i| delta[i] * model.w2[i * h + j]).sum();
                    gb1[j] += back;
                    for &(k, v) in &sparse[r] {
                        gw1[j * d + k] += back * v;
                    }
                }
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            let decay = 2.0 * cfg.l2_penalty * cfg.learning_rate;
            for (w, g) in model.w1.iter_mut().zip(&gw1).chain(model.w2.iter_mut().zip(&gw2)) {
                *w -= scale * g + decay * *w;
            }
            for (b, g) in model.b1.iter_mut().zip(&gb1).chain(model.b2.iter_mut().zip(&gb2)) {
                *b -= scale * g;
            }
        }
    }
    Ok(model)
}

/// Mean cross-entropy plus `l2_penalty * ||W||^2` over all weight matrices.
pub fn mean_loss<C: Classifier>(model: &C, weights: &[&[f64]], ds: &Dataset, l2_penalty: f64) -> Result<f64> {
    let labels = labeled(ds)?;
    let ce: f64 = ds
        .rows()
        .iter()
        .zip(&labels)
        .map(|(row, &y)| -model.decision_scores(&row.x)[y].ln())
        .sum::<f64>()
        / ds.len() as f64;
    let reg: f64 = weights.iter().flat_map(|w| w.iter()).map(|w| w * w).sum();
    Ok(ce + l2_penalty * reg)
}
