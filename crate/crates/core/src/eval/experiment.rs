use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    holdout_split, mf_topn_precision, mf_train, relative_precision_loss, remove_items, AttackSuite, MfConfig,
    HOLDOUT_PER_USER,
};
use crate::baselines::{correlation_defend, qpm_defend, qpm_fit, quantize_kmeans, rr_defend, RrConfig};
use crate::classify::{train_linear, train_mlp, LinearSoftmaxModel, Model, TrainConfig};
use crate::dataset::{split_overlap, train_test_split, Dataset, UserRow};
use crate::domain::{l0_norm, l2_norm, Label, PublicVector};
use crate::error::{Error, Result};
use crate::mechanism::{target_empirical, target_uniform, TargetDistribution};
use crate::seed::{Rng, SeedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenderKind {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Uniform,
    Empirical,
}

/// Held-out test users plus the defender's and the attacker's training folds.
#[derive(Debug, Clone)]
pub struct Folds {
    pub test: Dataset,
    pub defender: Dataset,
    pub attacker: Dataset,
}

/// Test split first, then the remaining users are divided into two folds
/// sharing `overlap_pct` percent of their users.
pub fn make_folds(ds: &Dataset, test_fraction: f64, overlap_pct: f64, seed: SeedSpec) -> Result<Folds> {
    let (train, test) = train_test_split(ds, test_fraction, seed.derive("test-split"))?;
    let (defender, attacker) = split_overlap(&train, overlap_pct, seed.derive("folds"))?;
    Ok(Folds { test, defender, attacker })
}

pub fn train_defender(fold: &Dataset, kind: DefenderKind, cfg: &TrainConfig, hidden: usize) -> Result<Model> {
    Ok(match kind {
        DefenderKind::Linear => Model::Linear(train_linear(fold, cfg)?),
        DefenderKind::Mlp => Model::Mlp(train_mlp(fold, cfg, hidden)?),
    })
}

/// Uniform, or the label frequencies of the defender's fold.
pub fn target_for(kind: TargetKind, defender_fold: &Dataset) -> Result<TargetDistribution> {
    match kind {
        TargetKind::Uniform => target_uniform(defender_fold.m()),
        TargetKind::Empirical => target_empirical(&defender_fold.labels()?, defender_fold.m()),
    }
}

/// Runs `defense` on every row with the row's own `(seed, stage, user_id)`
/// stream. Returns the defended set and per-user `(l0, l2)` costs.
pub fn defend_rows<F>(ds: &Dataset, stage: &str, seed: SeedSpec, defense: F) -> Result<(Dataset, Vec<(usize, f64)>)>
where
    F: Fn(&UserRow, &mut Rng) -> Result<PublicVector> + Sync,
{
    let out: Vec<PublicVector> = ds
        .rows()
        .par_iter()
        .map(|row| {
            let mut rng = seed.user_stream(stage, &row.user_id);
            defense(row, &mut rng)
        })
        .collect::<Result<_>>()?;
    let costs = ds
        .rows()
        .iter()
        .zip(&out)
        .map(|(row, y)| {
            let r = row.x.diff(y);
            (l0_norm(&r), l2_norm(&r))
        })
        .collect();
    Ok((ds.with_vectors(out)?, costs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub method: String,
    /// Epsilon for RR, k for the correlation heuristic, beta for QPM.
    pub param: f64,
    pub attack: String,
    pub accuracy: f64,
    pub mean_l0: f64,
    pub mean_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSettings {
    pub rr_epsilons: Vec<f64>,
    pub correlation_ks: Vec<usize>,
    pub qpm_betas: Vec<f64>,
    pub qpm_k: usize,
    pub qpm_iters: usize,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            rr_epsilons: vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
            correlation_ks: vec![1, 2, 4, 8, 16, 32],
            qpm_betas: Vec::new(),
            qpm_k: 16,
            qpm_iters: 20,
        }
    }
}

/// Named defense applied to a whole set.
pub enum BaselineDefense<'a> {
    Rr(RrConfig),
    Correlation { k: usize, model: &'a LinearSoftmaxModel },
    Qpm(&'a crate::baselines::QpmDefense),
}

impl BaselineDefense<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineDefense::Rr(_) => "rr",
            BaselineDefense::Correlation { .. } => "correlation",
            BaselineDefense::Qpm(_) => "qpm",
        }
    }

    pub fn apply(&self, ds: &Dataset, seed: SeedSpec) -> Result<(Dataset, Vec<(usize, f64)>)> {
        let stage = self.name();
        match self {
            BaselineDefense::Rr(cfg) => defend_rows(ds, stage, seed, |row, rng| Ok(rr_defend(&row.x, cfg, rng))),
            BaselineDefense::Correlation { k, model } => defend_rows(ds, stage, seed, |row, _| {
                let label: Label = row.label.ok_or_else(|| Error::MissingLabel(row.user_id.clone()))?;
                Ok(correlation_defend(&row.x, label, *k, model, ds.grid())?.0)
            }),
            BaselineDefense::Qpm(q) => defend_rows(ds, stage, seed, |row, rng| {
                Ok(qpm_defend(&row.x, &q.codebook, &q.mapping, ds.grid(), rng)?.0)
            }),
        }
    }
}

fn mean_costs(costs: &[(usize, f64)]) -> (f64, f64) {
    if costs.is_empty() {
        return (0.0, 0.0);
    }
    let n = costs.len() as f64;
    (
        costs.iter().map(|c| c.0 as f64).sum::<f64>() / n,
        costs.iter().map(|c| c.1).sum::<f64>() / n,
    )
}

/// Attacker accuracy and noise cost of every configured baseline defense.
/// `linear` drives the correlation heuristic.
pub fn baseline_sweep(
    suite: &AttackSuite,
    folds: &Folds,
    linear: &LinearSoftmaxModel,
    settings: &BaselineSettings,
    seed: SeedSpec,
) -> Result<Vec<BaselineRow>> {
    let mut defenses: Vec<(f64, BaselineDefense)> = Vec::new();
    for &eps in &settings.rr_epsilons {
        if !(eps >= 0.0) {
            return Err(Error::InvalidConfig("RR epsilon must be >= 0".into()));
        }
        defenses.push((
            eps,
            BaselineDefense::Rr(RrConfig {
                epsilon: eps,
                grid: folds.test.grid().clone(),
            }),
        ));
    }
    for &k in &settings.correlation_ks {
        defenses.push((k as f64, BaselineDefense::Correlation { k, model: linear }));
    }
    let qpms = if settings.qpm_betas.is_empty() {
        Vec::new()
    } else {
        let k = settings.qpm_k.min(folds.defender.len());
        let codebook = quantize_kmeans(&folds.defender, k, settings.qpm_iters, seed.derive("qpm-codebook"))?;
        settings
            .qpm_betas
            .iter()
            .map(|&b| Ok((b, qpm_fit(&folds.defender, codebook.clone(), b)?)))
            .collect::<Result<Vec<_>>>()?
    };
    for (b, q) in &qpms {
        defenses.push((*b, BaselineDefense::Qpm(q)));
    }

    let mut rows = Vec::new();
    for (param, defense) in &defenses {
        let (defended, costs) = defense.apply(&folds.test, seed)?;
        let fold = if suite.needs_adversarial_training() {
            Some(defense.apply(&folds.attacker, seed.derive("attacker-fold"))?.0)
        } else {
            None
        };
        let (l0, l2) = mean_costs(&costs);
        for (kind, accuracy) in suite.evaluate(&defended, fold.as_ref())? {
            rows.push(BaselineRow {
                method: defense.name().to_string(),
                param: *param,
                attack: kind.name().to_string(),
                accuracy,
                mean_l0: l0,
                mean_l2: l2,
            });
        }
    }
    Ok(rows)
}

pub fn write_baseline_csv<W: std::io::Write>(w: W, rows: &[BaselineRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "param", "attack", "accuracy", "mean_l0", "mean_l2"])?;
    for r in rows {
        out.write_record([
            r.method.clone(),
            format!("{:.6}", r.param),
            r.attack.clone(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.mean_l0),
            format!("{:.6}", r.mean_l2),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecsysRow {
    pub method: String,
    pub n: usize,
    pub precision: f64,
    pub relative_loss: f64,
}

/// Top-N precision of MF trained on the clean set (method `none`) and on
/// each defended version of it. The same items are held out in every
/// version; the defended vectors keep whatever the defense put there.
pub fn recsys_eval(
    clean: &Dataset,
    defended: &[(String, Dataset)],
    mf: &MfConfig,
    top_n: usize,
    seed: SeedSpec,
) -> Result<Vec<RecsysRow>> {
    let (clean_train, holdout) = holdout_split(clean, HOLDOUT_PER_USER, seed.derive("holdout"))?;
    // Candidates are always the items the user has not rated, whatever the
    // defense did to the vector the recommender sees.
    let precision = |train: &Dataset| -> Result<f64> {
        let model = mf_train(train, mf)?;
        mf_topn_precision(&model, &clean_train, &holdout, top_n)
    };
    let pre1 = precision(&clean_train)?;
    let mut rows = vec![RecsysRow {
        method: "none".into(),
        n: top_n,
        precision: pre1,
        relative_loss: 0.0,
    }];
    for (name, ds) in defended {
        if ds.len() != clean.len() {
            return Err(Error::DimensionMismatch {
                expected: clean.len(),
                got: ds.len(),
            });
        }
        let pre2 = precision(&remove_items(ds, &holdout)?)?;
        rows.push(RecsysRow {
            method: name.clone(),
            n: top_n,
            precision: pre2,
            relative_loss: relative_precision_loss(pre1, pre2)?,
        });
    }
    Ok(rows)
}

pub fn write_recsys_csv<W: std::io::Write>(w: W, rows: &[RecsysRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "N", "precision", "relative_loss"])?;
    for r in rows {
        out.write_record([
            r.method.clone(),
            r.n.to_string(),
            format!("{:.6}", r.precision),
            format!("{:.6}", r.relative_loss),
        ])?;
    }
    out.flush()?;
    Ok(())
}
