//! Phase II: choose how often to apply each representative noise.
//!
//! Minimizes `KL(p || M)` over distributions `M` on the `m` noises subject
//! to `sum_i M_i c_i <= beta`, where `c_i` is the L0 cost of noise `i`. The
//! optimum has the form `M_i = p_i / (mu0 c_i + lambda)`; the two
//! multipliers are found by nested bisection. Noises that Phase I failed to
//! find carry infinite cost, get zero mass, and the target is renormalized
//! over the remaining values.

use rand::Rng;
use serde::Serialize;

use crate::classify::Classifier;
use crate::domain::{apply_noise, check_distribution, l2_norm, Label, NoiseVector, PublicVector, RatingGrid};
use crate::error::{Error, Result};
use crate::evade::{find_all_noises, EvasionResult, PandaConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    p: Vec<f64>,
}

impl TargetDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_distribution(&p)?;
        Ok(Self { p })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }
}

pub fn target_uniform(m: usize) -> Result<TargetDistribution> {
    if m == 0 {
        return Err(Error::InvalidDistribution("m must be >= 1".into()));
    }
    TargetDistribution::new(vec![1.0 / m as f64; m])
}

/// Label frequencies.
pub fn target_empirical(labels: &[Label], m: usize) -> Result<TargetDistribution> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = vec![0usize; m];
    for &l in labels {
        if l >= m {
            return Err(Error::LabelOutOfRange { label: l, m });
        }
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    TargetDistribution::new(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismDistribution {
    pub probs: Vec<f64>,
    /// L0 cost per noise; `f64::INFINITY` marks a noise Phase I did not find.
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    /// Budget multiplier. Infinite when the budget pins all mass on the
    /// cheapest values.
    pub mu0: f64,
    /// Normalization multiplier.
    pub lambda: f64,
    pub binding: bool,
    pub kkt_residual: f64,
    pub expected_cost: f64,
    /// Values excluded because their noise was not found.
    pub excluded: Vec<Label>,
}

fn validate_inputs(p: &[f64], costs: &[f64], beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Infeasible(format!("budget {beta} must be finite and >= 0")));
    }
    if p.len() != costs.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: costs.len(),
        });
    }
    check_distribution(p)?;
    if costs.iter().any(|c| c.is_nan() || *c < 0.0) {
        return Err(Error::InvalidConfig("costs must be >= 0".into()));
    }
    if costs.iter().all(|c| c.is_infinite()) {
        return Err(Error::Infeasible("every noise cost is infinite".into()));
    }
    Ok(())
}

/// Lowest index attaining the minimum over `idx`.
fn argmin_cost(costs: &[f64], idx: impl Iterator<Item = usize>) -> usize {
    let mut best: Option<usize> = None;
    for i in idx {
        if best.is_none_or(|b| costs[i] < costs[b]) {
            best = Some(i);
        }
    }
    best.expect("nonempty index set")
}

/// For fixed `mu0`, the `t = lambda + mu0 * cmin` in `(0, 1]` normalizing
/// `sum_i p_i / (mu0 (c_i - cmin) + t)` to one. Returns the normalized
/// weights and `lambda`.
fn solve_lambda(p: &[f64], costs: &[f64], support: &[usize], cmin: f64, mu0: f64) -> (Vec<f64>, f64) {
    let total = |t: f64| -> f64 {
        support
            .iter()
            .map(|&i| p[i] / (mu0 * (costs[i] - cmin) + t))
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-17 * hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = hi;
    let mut probs = vec![0.0; p.len()];
    let mut sum = 0.0;
    for &i in support {
        probs[i] = p[i] / (mu0 * (costs[i] - cmin) + t);
        sum += probs[i];
    }
    probs.iter_mut().for_each(|v| *v /= sum);
    (probs, t - mu0 * cmin)
}

fn expected_cost(probs: &[f64], costs: &[f64]) -> f64 {
    probs
        .iter()
        .zip(costs)
        .filter(|(m, c)| **m > 0.0 && c.is_finite())
        .map(|(m, c)| m * c)
        .sum()
}

fn kkt_residual(p: &[f64], probs: &[f64], costs: &[f64], mu0: f64, lambda: f64) -> f64 {
    (0..p.len())
        .filter(|&i| costs[i].is_finite())
        .map(|i| (p[i] - probs[i] * (mu0 * costs[i] + lambda)).abs())
        .fold(0.0, f64::max)
}

/// Solve for the KL-optimal mechanism under the expected-cost budget.
pub fn solve_mechanism(p: &[f64], costs: &[f64], beta: f64) -> Result<(MechanismDistribution, SolverReport)> {
    validate_inputs(p, costs, beta)?;
    let m = p.len();
    let finite: Vec<usize> = (0..m).filter(|&i| costs[i].is_finite()).collect();
    let excluded: Vec<Label> = (0..m).filter(|&i| costs[i].is_infinite()).collect();
    let done = |probs: Vec<f64>, mu0: f64, lambda: f64, binding: bool, residual: f64| {
        let report = SolverReport {
            mu0,
            lambda,
            binding,
            kkt_residual: residual,
            expected_cost: expected_cost(&probs, costs),
            excluded: excluded.clone(),
        };
        Ok((
            MechanismDistribution {
                probs,
                costs: costs.to_vec(),
            },
            report,
        ))
    };

    let cheapest = argmin_cost(costs, finite.iter().copied());
    if beta < costs[cheapest] {
        return Err(Error::Infeasible(format!(
            "budget {beta} is below the cheapest noise cost {}",
            costs[cheapest]
        )));
    }

    let mass: f64 = finite.iter().map(|&i| p[i]).sum();
    if mass <= 0.0 {
        // No target mass survives exclusion: fall back to the cheapest noise.
        let mut probs = vec![0.0; m];
        probs[cheapest] = 1.0;
        return done(probs, 0.0, 0.0, false, 0.0);
    }
    let mut p_hat = vec![0.0; m];
    for &i in &finite {
        p_hat[i] = p[i] / mass;
    }
    let support: Vec<usize> = finite.iter().copied().filter(|&i| p_hat[i] > 0.0).collect();

    // Rounding in the renormalization must not flip an exactly-met budget
    // to binding.
    let unconstrained = expected_cost(&p_hat, costs);
    if unconstrained <= beta * (1.0 + 1e-12) {
        let residual = kkt_residual(&p_hat, &p_hat, costs, 0.0, 1.0);
        return done(p_hat, 0.0, 1.0, false, residual);
    }

    let in_support = argmin_cost(costs, support.iter().copied());
    let cmin = costs[in_support];

    // A value outside the target's support that is cheaper than every
    // supported value can absorb the leftover mass (its multiplier bound
    // mu0 c_o + lambda = 0 becomes active).
    if costs[cheapest] < cmin {
        let c_o = costs[cheapest];
        if beta == c_o {
            let mut probs = vec![0.0; m];
            probs[cheapest] = 1.0;
            return done(probs, f64::INFINITY, f64::NEG_INFINITY, true, 0.0);
        }
        let slack = beta - c_o;
        let mut probs = vec![0.0; m];
        for &i in &support {
            probs[i] = p_hat[i] * slack / (costs[i] - c_o);
        }
        let used: f64 = probs.iter().sum();
        if used <= 1.0 {
            probs[cheapest] = 1.0 - used;
            let mu0 = 1.0 / slack;
            let lambda = -mu0 * c_o;
            let residual = kkt_residual(&p_hat, &probs, costs, mu0, lambda);
            return done(probs, mu0, lambda, true, residual);
        }
    } else if beta == cmin {
        // Only the cheapest supported values fit; split in proportion to p.
        let tied: Vec<usize> = support.iter().copied().filter(|&i| costs[i] == cmin).collect();
        let lambda: f64 = tied.iter().map(|&i| p_hat[i]).sum();
        let mut probs = vec![0.0; m];
        for &i in &tied {
            probs[i] = p_hat[i] / lambda;
        }
        return done(probs, f64::INFINITY, lambda, true, 0.0);
    }

    let cost_at = |mu0: f64| {
        let (probs, lambda) = solve_lambda(&p_hat, costs, &support, cmin, mu0);
        (expected_cost(&probs, costs), probs, lambda)
    };
    let mut hi = 1.0f64;
    while cost_at(hi).0 > beta {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Infeasible("budget multiplier diverged".into()));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-16 * hi {
            break;
        }
        let (c, _, _) = cost_at(mid);
        if (c - beta).abs() <= 1e-14 * beta.max(1.0) {
            hi = mid;
            break;
        }
        if c > beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu0 = hi;
    let (_, probs, lambda) = cost_at(mu0);
    let residual = kkt_residual(&p_hat, &probs, costs, mu0, lambda);
    done(probs, mu0, lambda, true, residual)
}

/// Inverse-CDF draw of a noise index with one uniform variate.
pub fn sample_index<R: Rng + ?Sized>(mechanism: &MechanismDistribution, rng: &mut R) -> Label {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &q) in mechanism.probs.iter().enumerate() {
        if q <= 0.0 {
            continue;
        }
        cum += q;
        last = i;
        if u < cum {
            return i;
        }
    }
    last
}

pub fn sample_noise<'a, R: Rng + ?Sized>(
    mechanism: &MechanismDistribution,
    noises: &'a [NoiseVector],
    rng: &mut R,
) -> (Label, &'a NoiseVector) {
    let i = sample_index(mechanism, rng);
    (i, &noises[i])
}

/// Everything the defender learns about one user.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseOutcome {
    pub noisy: PublicVector,
    pub chosen: Label,
    pub l0_cost: usize,
    pub l2_cost: f64,
    pub mechanism: MechanismDistribution,
    pub report: SolverReport,
}

/// Costs for Phase II from Phase I results.
pub fn noise_costs(results: &[EvasionResult]) -> Vec<f64> {
    results
        .iter()
        .map(|r| if r.success { r.l0_cost as f64 } else { f64::INFINITY })
        .collect()
}

/// Phase II given precomputed Phase I results.
pub fn defend_with_noises<R: Rng + ?Sized>(
    x: &PublicVector,
    results: &[EvasionResult],
    p: &TargetDistribution,
    beta: f64,
    grid: &RatingGrid,
    rng: &mut R,
) -> Result<DefenseOutcome> {
    if results.len() != p.m() {
        return Err(Error::DimensionMismatch {
            expected: p.m(),
            got: results.len(),
        });
    }
    let (mechanism, report) = solve_mechanism(p.probs(), &noise_costs(results), beta)?;
    let chosen = sample_index(&mechanism, rng);
    let noise = &results[chosen].noise;
    Ok(DefenseOutcome {
        noisy: apply_noise(x, noise, grid)?,
        chosen,
        l0_cost: results[chosen].l0_cost,
        l2_cost: l2_norm(noise),
        mechanism,
        report,
    })
}

/// Both phases for one user.
#[allow(clippy::too_many_arguments)]
pub fn defend_user<C: Classifier + ?Sized>(
    model: &C,
    x: &PublicVector,
    p: &TargetDistribution,
    beta: f64,
    cfg: &PandaConfig,
    grid: &RatingGrid,
    rng: &mut seed::Rng,
) -> Result<DefenseOutcome> {
    let results = find_all_noises(model, x, cfg, grid);
    defend_with_noises(x, &results, p, beta, grid, rng)
}
