use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::domain::PublicVector;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Items held out per user for the precision check.
pub const HOLDOUT_PER_USER: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfModel {
    pub rank: usize,
    /// n × rank, row-major.
    pub user_factors: Vec<f64>,
    /// d × rank, row-major.
    pub item_factors: Vec<f64>,
}

impl MfModel {
    pub fn n_users(&self) -> usize {
        self.user_factors.len() / self.rank
    }

    pub fn n_items(&self) -> usize {
        self.item_factors.len() / self.rank
    }

    fn user(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.rank..(u + 1) * self.rank]
    }

    fn item(&self, j: usize) -> &[f64] {
        &self.item_factors[j * self.rank..(j + 1) * self.rank]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfConfig {
    pub rank: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_penalty: f64,
    /// Half-width of the uniform factor initialization.
    pub init_scale: f64,
    /// Unobserved entries sampled as zero-valued targets per observed entry.
    /// Zero trains on observed entries only.
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            rank: 10,
            epochs: 50,
            learning_rate: 0.05,
            l2_penalty: 0.01,
            init_scale: 0.1,
            negatives_per_positive: 0,
            seed: 0,
        }
    }
}

impl MfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("MF rank must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.l2_penalty >= 0.0) || !(self.init_scale > 0.0) {
            return Err(Error::InvalidConfig(
                "MF learning_rate and init_scale must be > 0, l2_penalty >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Stochastic gradient descent on squared error over the nonzero entries,
/// with l2 regularization on the touched factors.
pub fn mf_train(ds: &Dataset, cfg: &MfConfig) -> Result<MfModel> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n, d, k) = (ds.len(), ds.d(), cfg.rank);
    let seed = SeedSpec::new(cfg.seed);
    let mut rng = seed.stream("mf-init");
    let s = cfg.init_scale;
    let mut model = MfModel {
        rank: k,
        user_factors: (0..n * k).map(|_| rng.random_range(-s..s)).collect(),
        item_factors: (0..d * k).map(|_| rng.random_range(-s..s)).collect(),
    };

    let observed: Vec<(usize, usize, f64)> = ds
        .rows()
        .iter()
        .enumerate()
        .flat_map(|(u, row)| {
            row.x
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(move |(j, &v)| (u, j, v))
        })
        .collect();
    let zeros: Vec<Vec<usize>> = ds
        .rows()
        .iter()
        .map(|row| (0..d).filter(|&j| row.x[j] == 0.0).collect())
        .collect();

    let mut rng = seed.stream("mf-sgd");
    let mut samples = Vec::with_capacity(observed.len() * (1 + cfg.negatives_per_positive));
    for _ in 0..cfg.epochs {
        samples.clear();
        samples.extend_from_slice(&observed);
        if cfg.negatives_per_positive > 0 {
            for &(u, _, _) in &observed {
                let pool = &zeros[u];
                if pool.is_empty() {
                    continue;
                }
                for _ in 0..cfg.negatives_per_positive {
                    samples.push((u, pool[rng.random_range(0..pool.len())], 0.0));
                }
            }
        }
        samples.shuffle(&mut rng);
        for &(u, j, v) in &samples {
            sgd_step(&mut model, u, j, v, cfg);
        }
    }
    Ok(model)
}

fn sgd_step(model: &mut MfModel, u: usize, j: usize, v: f64, cfg: &MfConfig) {
    let k = model.rank;
    let err = mf_predict(model, u, j) - v;
    let (lr, l2) = (cfg.learning_rate, cfg.l2_penalty);
    for f in 0..k {
        let pu = model.user_factors[u * k + f];
        let qj = model.item_factors[j * k + f];
        model.user_factors[u * k + f] -= lr * (err * qj + l2 * pu);
        model.item_factors[j * k + f] -= lr * (err * pu + l2 * qj);
    }
}

pub fn mf_predict(model: &MfModel, user: usize, item: usize) -> f64 {
    model.user(user).iter().zip(model.item(item)).map(|(a, b)| a * b).sum()
}

/// Picks `per_user` rated items of every user with at least that many
/// ratings and zeroes them. Returns the training set and the held-out items
/// (sorted; empty for users that were skipped).
pub fn holdout_split(ds: &Dataset, per_user: usize, seed: SeedSpec) -> Result<(Dataset, Vec<Vec<usize>>)> {
    if per_user == 0 {
        return Err(Error::InvalidConfig("holdout size must be >= 1".into()));
    }
    let holdout: Vec<Vec<usize>> = ds
        .rows()
        .iter()
        .map(|row| {
            let rated: Vec<usize> = (0..ds.d()).filter(|&j| row.x[j] != 0.0).collect();
            if rated.len() < per_user {
                return Vec::new();
            }
            let mut rng = seed.user_stream("holdout", &row.user_id);
            let mut picked: Vec<usize> = index::sample(&mut rng, rated.len(), per_user)
                .into_iter()
                .map(|i| rated[i])
                .collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    Ok((remove_items(ds, &holdout)?, holdout))
}

/// Zeroes the given items of every user.
pub fn remove_items(ds: &Dataset, items: &[Vec<usize>]) -> Result<Dataset> {
    if items.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            got: items.len(),
        });
    }
    let xs = ds
        .rows()
        .iter()
        .zip(items)
        .map(|(row, drop)| {
            let mut x = row.x.as_slice().to_vec();
            for &j in drop {
                x[j] = 0.0;
            }
            PublicVector::new(x, ds.grid())
        })
        .collect::<Result<Vec<_>>>()?;
    ds.with_vectors(xs)
}

/// Mean over users with a non-empty holdout of `|topN ∩ holdout| / N`.
/// Candidates are the items that are zero in `observed` (the user's
/// training vector); ties go to the lower item index.
pub fn mf_topn_precision(model: &MfModel, observed: &Dataset, holdout: &[Vec<usize>], n: usize) -> Result<f64> {
    let train = observed;
    if n == 0 {
        return Err(Error::InvalidConfig("N must be >= 1".into()));
    }
    if holdout.len() != train.len() || model.n_users() != train.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            got: holdout.len().min(model.n_users()),
        });
    }
    if model.n_items() != train.d() {
        return Err(Error::DimensionMismatch {
            expected: train.d(),
            got: model.n_items(),
        });
    }
    let mut total = 0.0;
    let mut users = 0usize;
    for (u, (row, held)) in train.rows().iter().zip(holdout).enumerate() {
        if held.is_empty() {
            continue;
        }
        let mut candidates: Vec<(usize, f64)> = (0..train.d())
            .filter(|&j| row.x[j] == 0.0)
            .map(|j| (j, mf_predict(model, u, j)))
            .collect();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let hits = candidates.iter().take(n).filter(|(j, _)| held.contains(j)).count();
        total += hits as f64 / n as f64;
        users += 1;
    }
    if users == 0 {
        return Err(Error::InvalidConfig("no user has a holdout".into()));
    }
    Ok(total / users as f64)
}

/// `|pre1 - pre2| / pre1`.
pub fn relative_precision_loss(pre1: f64, pre2: f64) -> Result<f64> {
    if !(pre1 > 0.0) || !pre2.is_finite() {
        return Err(Error::InvalidConfig("baseline precision must be > 0".into()));
    }
    Ok((pre1 - pre2).abs() / pre1)
}
