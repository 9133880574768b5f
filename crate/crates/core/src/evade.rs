//! Phase I: for each attribute value, a small-L0 perturbation that makes the
//! defender's classifier predict that value.
//!
//! [`panda`] is a greedy saliency search over one entry per step, where each
//! step may raise or lower its entry and only entries the noise-type policy
//! allows (judged on the original vector) are touched. [`jsma`] is the same
//! search committed to one direction for the whole run, and [`fgsm`] is a
//! single signed-gradient step. The last two are comparison baselines.

use serde::{Deserialize, Serialize};

use crate::classify::{argmax, Classifier};
use crate::domain::{l0_norm, Label, NoiseTypePolicy, NoiseVector, PublicVector, RatingGrid};
use crate::error::{Error, Result};

/// Entries within this of a bound have no headroom in that direction.
const HEADROOM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PandaConfig {
    /// Per-step modification magnitude.
    pub tau: f64,
    pub max_iters: usize,
    pub policy: NoiseTypePolicy,
}

impl Default for PandaConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            max_iters: 100,
            policy: NoiseTypePolicy::ModifyAdd,
        }
    }
}

impl PandaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("tau must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvasionResult {
    pub target: Label,
    pub noise: NoiseVector,
    pub l0_cost: usize,
    pub iterations: usize,
    pub success: bool,
}

impl EvasionResult {
    fn zero(target: Label, d: usize) -> Self {
        Self {
            target,
            noise: NoiseVector::zeros(d),
            l0_cost: 0,
            iterations: 0,
            success: true,
        }
    }

    fn finish(target: Label, x: &PublicVector, final_x: &PublicVector, iterations: usize, success: bool) -> Self {
        let noise = x.diff(final_x);
        Self {
            target,
            l0_cost: l0_norm(&noise),
            noise,
            iterations,
            success,
        }
    }
}

/// One accepted move of the greedy search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub index: usize,
    pub direction: i8,
    /// Target margin before the move.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvasionMethod {
    Panda,
    Jsma,
    Fgsm,
}

impl EvasionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EvasionMethod::Panda => "panda",
            EvasionMethod::Jsma => "jsma",
            EvasionMethod::Fgsm => "fgsm",
        }
    }
}

/// `logit_i - max_{j != i} logit_j` and its input gradient.
pub fn target_margin<C: Classifier + ?Sized>(model: &C, x: &[f64], target: Label) -> (f64, Vec<f64>) {
    let z = model.logits(x);
    let mut rival = if target == 0 { 1 } else { 0 };
    for (j, &v) in z.iter().enumerate() {
        if j != target && v > z[rival] {
            rival = j;
        }
    }
    let mut coeffs = vec![0.0; z.len()];
    coeffs[target] = 1.0;
    coeffs[rival] = -1.0;
    (z[target] - z[rival], model.logit_vjp(x, &coeffs))
}

#[derive(Clone, Copy)]
enum Directions {
    Both,
    Only(i8),
}

/// Highest-scoring `(index, direction, score)` among moves with headroom.
/// A move scores the first-order margin gain of its clipped step.
fn best_move(cur: &[f64], grad: &[f64], tau: f64, feasible: &[usize], dirs: Directions) -> Option<(usize, i8, f64)> {
    let mut best: Option<(usize, i8, f64)> = None;
    let mut consider = |k: usize, dir: i8, score: f64| {
        if score > 0.0 && best.is_none_or(|(_, _, s)| score > s) {
            best = Some((k, dir, score));
        }
    };
    for &k in feasible {
        let up = (cur[k] + tau).min(1.0) - cur[k];
        let down = cur[k] - (cur[k] - tau).max(0.0);
        let allow = |dir: i8| match dirs {
            Directions::Both => true,
            Directions::Only(d) => d == dir,
        };
        if up > HEADROOM_EPS && allow(1) {
            consider(k, 1, grad[k] * up);
        }
        if down > HEADROOM_EPS && allow(-1) {
            consider(k, -1, -grad[k] * down);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn greedy_search<C: Classifier + ?Sized>(
    model: &C,
    x: &PublicVector,
    target: Label,
    tau: f64,
    max_iters: usize,
    feasible: &[usize],
    dirs: Directions,
    grid: &RatingGrid,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> EvasionResult {
    let mut cur = x.to_vec();
    let mut iterations = 0;
    loop {
        let mut stalled = false;
        while model.predict(&cur) != target && iterations < max_iters {
            let (margin, grad) = target_margin(model, &cur, target);
            let Some((k, dir, _)) = best_move(&cur, &grad, tau, feasible, dirs) else {
                stalled = true;
                break;
            };
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceStep {
                    iteration: iterations,
                    index: k,
                    direction: dir,
                    margin,
                });
            }
            cur[k] = (cur[k] + f64::from(dir) * tau).clamp(0.0, 1.0);
            iterations += 1;
        }
        let reached = model.predict(&cur) == target;
        let snapped = PublicVector::snapped(&cur, grid);
        if model.predict(&snapped) == target {
            return EvasionResult::finish(target, x, &snapped, iterations, true);
        }
        if !reached || stalled || iterations >= max_iters {
            return EvasionResult::finish(target, x, &snapped, iterations, false);
        }
        // Snapping undid the evasion; keep searching from the grid point.
        cur = snapped.into_inner();
    }
}

fn check_target<C: Classifier + ?Sized>(model: &C, x: &PublicVector, target: Label) {
    assert_eq!(x.dim(), model.d(), "input dimension");
    assert!(target < model.m(), "target {target} out of range");
}

pub fn panda<C: Classifier + ?Sized>(
    model: &C,
    x: &PublicVector,
    target: Label,
    cfg: &PandaConfig,
    grid: &RatingGrid,
) -> EvasionResult {
    panda_traced(model, x, target, cfg, grid, None)
}

/// [`panda`], recording every accepted move into `trace`.
pub fn panda_traced<C: Classifier + ?Sized>(
    model: &C,
    x: &PublicVector,
    target: Label,
    cfg: &PandaConfig,
    grid: &RatingGrid,
    trace: Option<&mut Vec<TraceStep>>,
) -> EvasionResult {
    check_target(model, x, target);
    if model.predict(x) == target {
        return EvasionResult::zero(target, x.dim());
    }
    let feasible = crate::domain::policy_feasible_indices(x, cfg.policy);
    greedy_search(model, x, target, cfg.tau, cfg.max_iters, &feasible, Directions::Both, grid, trace)
}

/// Single-direction saliency search over all entries. `cfg.policy` is
/// ignored.
pub fn jsma<C: Classifier + ?Sized>(
    model: &C,
    x: &PublicVector,
    target: Label,
    cfg: &PandaConfig,
    grid: &RatingGrid,
) -> EvasionResult {
    check_target(model, x, target);
    if model.predict(x) == target {
        return EvasionResult::zero(target, x.dim());
    }
    let all: Vec<usize> = (0..x.dim()).collect();
    let (_, grad) = target_margin(model, x, target);
    let up = best_move(x, &grad, cfg.tau, &all, Directions::Only(1)).map_or(0.0, |m| m.2);
    let down = best_move(x, &grad, cfg.tau, &all, Directions::Only(-1)).map_or(0.0, |m| m.2);
    let dir = if up >= down { 1 } else { -1 };
    greedy_search(model, x, target, cfg.tau, cfg.max_iters, &all, Directions::Only(dir), grid, None)
}

/// One step `clip(x + epsilon * sign(g))` on the target margin, snapped to
/// the grid.
pub fn fgsm<C: Classifier + ?Sized>(
    model: &C,
    x: &PublicVector,
    target: Label,
    epsilon: f64,
    grid: &RatingGrid,
) -> EvasionResult {
    check_target(model, x, target);
    assert!(epsilon > 0.0, "epsilon must be > 0");
    if model.predict(x) == target {
        return EvasionResult::zero(target, x.dim());
    }
    let (_, grad) = target_margin(model, x, target);
    let stepped: Vec<f64> = x
        .iter()
        .zip(&grad)
        .map(|(&v, &g)| {
            let sign = if g > 0.0 {
                1.0
            } else if g < 0.0 {
                -1.0
            } else {
                0.0
            };
            (v + epsilon * sign).clamp(0.0, 1.0)
        })
        .collect();
    let snapped = PublicVector::snapped(&stepped, grid);
    let success = model.predict(&snapped) == target;
    EvasionResult::finish(target, x, &snapped, 1, success)
}

/// One representative noise per attribute value; the currently predicted
/// value gets the zero noise.
pub fn find_all_noises<C: Classifier + ?Sized>(
    model: &C,
    x: &PublicVector,
    cfg: &PandaConfig,
    grid: &RatingGrid,
) -> Vec<EvasionResult> {
    (0..model.m()).map(|i| panda(model, x, i, cfg, grid)).collect()
}

/// Dispatch by method. FGSM uses `epsilon`; the others use `cfg`.
pub fn run_method<C: Classifier + ?Sized>(
    method: EvasionMethod,
    model: &C,
    x: &PublicVector,
    target: Label,
    cfg: &PandaConfig,
    epsilon: f64,
    grid: &RatingGrid,
) -> EvasionResult {
    match method {
        EvasionMethod::Panda => panda(model, x, target, cfg, grid),
        EvasionMethod::Jsma => jsma(model, x, target, cfg, grid),
        EvasionMethod::Fgsm => fgsm(model, x, target, epsilon, grid),
    }
}

/// Predicted label, exposed for callers that only hold a trait object.
pub fn current_prediction<C: Classifier + ?Sized>(model: &C, x: &[f64]) -> Label {
    argmax(&model.logits(x))
}
