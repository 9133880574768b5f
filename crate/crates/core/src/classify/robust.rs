use rand::Rng;
use rayon::prelude::*;

use super::{argmax, train_mlp, Classifier, MlpModel, Predictor, TrainConfig};
use crate::dataset::{Dataset, UserRow};
use crate::domain::{Label, PublicVector};
use crate::error::{Error, Result};
use crate::seed::{self, SeedSpec};

/// Predicts the most common training label for everyone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MostPopular {
    pub label: Label,
}

impl Predictor for MostPopular {
    fn predict_row(&self, _user_id: &str, _x: &[f64]) -> Label {
        self.label
    }
}

/// Modal label; ties go to the lowest label.
pub fn baseline_most_popular(labels: &[Label]) -> Result<MostPopular> {
    let max = *labels.iter().max().ok_or(Error::EmptyDataset)?;
    let mut counts = vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let counts: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
    Ok(MostPopular {
        label: argmax(&counts),
    })
}

/// Majority vote of `model` over `n_samples` points drawn uniformly from the
/// hypercube `[x - radius, x + radius]^d` intersected with `[0, 1]^d`.
pub fn region_based_predict<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    radius: f64,
    n_samples: usize,
    rng: &mut seed::Rng,
) -> Label {
    assert!(radius >= 0.0 && n_samples >= 1);
    let mut votes = vec![0.0; model.m()];
    let mut point = vec![0.0; x.len()];
    for _ in 0..n_samples {
        for (p, &v) in point.iter_mut().zip(x) {
            let lo = (v - radius).max(0.0);
            let hi = (v + radius).min(1.0);
            *p = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        votes[model.predict(&point)] += 1.0;
    }
    argmax(&votes)
}

/// Region-based attacker: each user gets its own sampling stream.
pub struct RegionClassifier<C> {
    pub model: C,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: SeedSpec,
}

impl<C: Classifier> Predictor for RegionClassifier<C> {
    fn predict_row(&self, user_id: &str, x: &[f64]) -> Label {
        let mut rng = self.seed.user_stream("region-vote", user_id);
        region_based_predict(&self.model, x, self.radius, self.n_samples, &mut rng)
    }
}

/// Train an MLP on the training set after passing every row through
/// `defense`.
pub fn adversarial_training<F>(ds: &Dataset, cfg: &TrainConfig, hidden: usize, defense: F) -> Result<MlpModel>
where
    F: Fn(&UserRow) -> Result<PublicVector> + Sync,
{
    let noisy: Vec<PublicVector> = ds.rows().par_iter().map(&defense).collect::<Result<_>>()?;
    train_mlp(&ds.with_vectors(noisy)?, cfg, hidden)
}
