use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::AttackSuite;
use crate::classify::Classifier;
use crate::dataset::Dataset;
use crate::domain::{Label, PublicVector};
use crate::error::{Error, Result};
use crate::evade::{find_all_noises, EvasionResult, PandaConfig};
use crate::mechanism::{defend_with_noises, DefenseOutcome, TargetDistribution};
use crate::seed::SeedSpec;

/// Phase I results for every row of a dataset. They do not depend on the
/// budget, so one cache serves a whole sweep.
pub struct PhaseOneCache {
    pub results: Vec<Vec<EvasionResult>>,
}

pub fn phase_one<C: Classifier + ?Sized>(model: &C, ds: &Dataset, cfg: &PandaConfig) -> PhaseOneCache {
    let results = ds
        .rows()
        .par_iter()
        .map(|row| find_all_noises(model, &row.x, cfg, ds.grid()))
        .collect();
    PhaseOneCache { results }
}

pub struct DefendedSet {
    pub data: Dataset,
    pub outcomes: Vec<DefenseOutcome>,
}

impl DefendedSet {
    pub fn mean_l0(&self) -> f64 {
        mean(self.outcomes.iter().map(|o| o.l0_cost as f64))
    }

    pub fn mean_l2(&self) -> f64 {
        mean(self.outcomes.iter().map(|o| o.l2_cost))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Phase II for every row at one budget, each user sampling from its own
/// `(seed, "defend", user_id)` stream.
pub fn defend_dataset(
    ds: &Dataset,
    cache: &PhaseOneCache,
    p: &TargetDistribution,
    beta: f64,
    seed: SeedSpec,
) -> Result<DefendedSet> {
    if cache.results.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            got: cache.results.len(),
        });
    }
    let outcomes: Vec<DefenseOutcome> = ds
        .rows()
        .par_iter()
        .zip(cache.results.par_iter())
        .map(|(row, results)| {
            let mut rng = seed.user_stream("defend", &row.user_id);
            defend_with_noises(&row.x, results, p, beta, ds.grid(), &mut rng)
        })
        .collect::<Result<_>>()?;
    let xs: Vec<PublicVector> = outcomes.iter().map(|o| o.noisy.clone()).collect();
    Ok(DefendedSet {
        data: ds.with_vectors(xs)?,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub attack: String,
    pub accuracy: f64,
    pub mean_l0: f64,
    pub mean_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn accuracy(&self, beta: f64, attack: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.beta == beta && r.attack == attack)
            .map(|r| r.accuracy)
    }
}

/// Defend every test user at each budget and score every attacker.
#[allow(clippy::too_many_arguments)]
pub fn sweep_budget<C: Classifier + ?Sized>(
    defender: &C,
    attackers: &AttackSuite,
    attacker_fold: &Dataset,
    test: &Dataset,
    betas: &[f64],
    p: &TargetDistribution,
    cfg: &PandaConfig,
    seed: SeedSpec,
) -> Result<SweepResult> {
    if betas.is_empty() {
        return Err(Error::InvalidConfig("at least one budget is required".into()));
    }
    if betas.iter().any(|b| !(*b >= 0.0)) || betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("budgets must be non-negative and ascending".into()));
    }
    let test_cache = phase_one(defender, test, cfg);
    let fold_cache = attackers
        .needs_adversarial_training()
        .then(|| phase_one(defender, attacker_fold, cfg));
    let mut rows = Vec::new();
    for &beta in betas {
        let defended = defend_dataset(test, &test_cache, p, beta, seed)?;
        let defended_fold = fold_cache
            .as_ref()
            .map(|c| defend_dataset(attacker_fold, c, p, beta, seed.derive("attacker-fold")))
            .transpose()?;
        let (l0, l2) = (defended.mean_l0(), defended.mean_l2());
        for (kind, accuracy) in attackers.evaluate(&defended.data, defended_fold.as_ref().map(|d| &d.data))? {
            rows.push(SweepRow {
                beta,
                attack: kind.name().to_string(),
                accuracy,
                mean_l0: l0,
                mean_l2: l2,
            });
        }
    }
    Ok(SweepResult { rows })
}

/// Mean L0 of the applied noise grouped by chosen target. Groups with no
/// users are absent.
pub fn noise_stats(outcomes: impl IntoIterator<Item = (Label, usize)>) -> BTreeMap<Label, f64> {
    let mut acc: BTreeMap<Label, (f64, usize)> = BTreeMap::new();
    for (target, cost) in outcomes {
        let e = acc.entry(target).or_default();
        e.0 += cost as f64;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

pub fn write_sweep_csv<W: std::io::Write>(w: W, result: &SweepResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["beta", "attack", "accuracy", "mean_l0", "mean_l2"])?;
    for r in &result.rows {
        out.write_record([
            format!("{:.6}", r.beta),
            r.attack.clone(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.mean_l0),
            format!("{:.6}", r.mean_l2),
        ])?;
    }
    out.flush()?;
    Ok(())
}
