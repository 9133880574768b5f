use rayon::prelude::*;
use serde::Serialize;

use crate::classify::Classifier;
use crate::dataset::Dataset;
use crate::domain::NoiseTypePolicy;
use crate::error::{Error, Result};
use crate::evade::{current_prediction, run_method, EvasionMethod, EvasionResult, PandaConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvasionSummary {
    pub method: EvasionMethod,
    pub policy: NoiseTypePolicy,
    pub attempts: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean L0 over the (user, target) pairs on which every compared
    /// configuration succeeded.
    pub paired_mean_l0: f64,
    pub paired_count: usize,
    /// Mean L0 over this configuration's own successes.
    pub mean_l0_success: f64,
}

/// Runs every `(method, policy)` configuration against every user and every
/// target other than the current prediction.
pub fn evasion_benchmark<C: Classifier + ?Sized>(
    model: &C,
    ds: &Dataset,
    configs: &[(EvasionMethod, NoiseTypePolicy)],
    cfg: &PandaConfig,
    epsilon: f64,
) -> Result<Vec<EvasionSummary>> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig("no evasion configurations given".into()));
    }
    cfg.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon must be > 0".into()));
    }
    let m = model.m();
    // results[user][target][config]
    let results: Vec<Vec<Vec<EvasionResult>>> = ds
        .rows()
        .par_iter()
        .map(|row| {
            let pred = current_prediction(model, &row.x);
            (0..m)
                .filter(|&t| t != pred)
                .map(|t| {
                    configs
                        .iter()
                        .map(|&(method, policy)| {
                            let c = PandaConfig { policy, ..*cfg };
                            run_method(method, model, &row.x, t, &c, epsilon, ds.grid())
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let pairs: Vec<&Vec<EvasionResult>> = results.iter().flatten().collect();
    let joint: Vec<&&Vec<EvasionResult>> = pairs.iter().filter(|rs| rs.iter().all(|r| r.success)).collect();
    Ok(configs
        .iter()
        .enumerate()
        .map(|(c, &(method, policy))| {
            let attempts = pairs.len();
            let successes = pairs.iter().filter(|rs| rs[c].success).count();
            let own: f64 = pairs
                .iter()
                .filter(|rs| rs[c].success)
                .map(|rs| rs[c].l0_cost as f64)
                .sum();
            let paired: f64 = joint.iter().map(|rs| rs[c].l0_cost as f64).sum();
            EvasionSummary {
                method,
                policy,
                attempts,
                successes,
                success_rate: ratio(successes as f64, attempts),
                paired_mean_l0: ratio(paired, joint.len()),
                paired_count: joint.len(),
                mean_l0_success: ratio(own, successes),
            }
        })
        .collect())
}

fn ratio(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
