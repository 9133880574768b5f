use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::TrainConfig;
use crate::dataset::SynthConfig;
use crate::domain::RatingGrid;
use crate::error::{Error, Result};
use crate::eval::{AttackKind, AttackerSettings, BaselineSettings, DefenderKind, MfConfig, TargetKind};
use crate::evade::PandaConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Input dataset (JSON lines). Generated from `synth` when absent.
    pub data: Option<PathBuf>,
    /// Trained defender model. Trained on the fly when absent.
    pub model: Option<PathBuf>,
    /// Defended dataset scored by `attack`. The clean test split when absent.
    pub defended: Option<PathBuf>,
    /// Game instance for `game-lp`.
    pub game: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub grid: RatingGrid,
    pub test_fraction: f64,
    /// Percent of training users shared by the defender's and the
    /// attacker's folds.
    pub overlap_pct: f64,
    pub panda: PandaConfig,
    pub fgsm_epsilon: f64,
    /// Budgets swept by `sweep`.
    pub betas: Vec<f64>,
    /// Budget used by `defend` and `attack`.
    pub beta: f64,
    pub target: TargetKind,
    pub defender: DefenderKind,
    pub defender_hidden: usize,
    pub train: TrainConfig,
    pub attackers: Vec<AttackKind>,
    pub attacker: AttackerSettings,
    pub baselines: BaselineSettings,
    /// Test users used by `compare-evasion`; 0 means all.
    pub evasion_users: usize,
    pub mf: MfConfig,
    pub top_n: usize,
    pub recsys_betas: Vec<f64>,
    pub recsys_rr_epsilons: Vec<f64>,
    /// Default output of `sweep` when `--out` is not given.
    pub sweep_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            paths: Paths::default(),
            synth: SynthConfig {
                n: 80_000,
                ..SynthConfig::default()
            },
            grid: RatingGrid::default(),
            test_fraction: 0.02,
            overlap_pct: 0.0,
            panda: PandaConfig::default(),
            fgsm_epsilon: 1.0,
            betas: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 100.0],
            beta: 4.0,
            target: TargetKind::Uniform,
            defender: DefenderKind::Linear,
            defender_hidden: 64,
            train: TrainConfig::default(),
            attackers: vec![AttackKind::Baseline, AttackKind::Logistic, AttackKind::Network],
            attacker: AttackerSettings::default(),
            baselines: BaselineSettings::default(),
            evasion_users: 500,
            mf: MfConfig {
                negatives_per_positive: 1,
                ..MfConfig::default()
            },
            top_n: 10,
            recsys_betas: vec![1.0, 2.0, 4.0, 100.0],
            recsys_rr_epsilons: vec![0.0, 1.0, 2.0, 3.0, 5.0],
            sweep_out: None,
        }
    }
}

fn ensure(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg.into()))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Checks every section before any work starts.
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.test_fraction > 0.0 && self.test_fraction < 1.0,
            "test_fraction must lie in (0, 1)",
        )?;
        ensure(
            (0.0..=100.0).contains(&self.overlap_pct),
            "overlap_pct must lie in [0, 100]",
        )?;
        self.panda.validate()?;
        ensure(self.fgsm_epsilon > 0.0, "fgsm_epsilon must be > 0")?;
        ensure(!self.betas.is_empty(), "betas must not be empty")?;
        ensure(
            self.betas.iter().all(|b| b.is_finite() && *b >= 0.0) && self.betas.windows(2).all(|w| w[0] < w[1]),
            "betas must be finite, non-negative and strictly ascending",
        )?;
        ensure(self.beta.is_finite() && self.beta >= 0.0, "beta must be finite and >= 0")?;
        ensure(self.defender_hidden >= 1, "defender_hidden must be >= 1")?;
        self.train.validate()?;
        self.attacker.train.validate()?;
        ensure(!self.attackers.is_empty(), "attackers must not be empty")?;
        ensure(self.attacker.hidden >= 1, "attacker.hidden must be >= 1")?;
        ensure(
            self.attacker.rc_radius >= 0.0 && self.attacker.rc_samples >= 1,
            "attacker.rc_radius must be >= 0 and rc_samples >= 1",
        )?;
        ensure(
            self.baselines.rr_epsilons.iter().all(|e| *e >= 0.0),
            "RR epsilons must be >= 0",
        )?;
        ensure(
            self.recsys_rr_epsilons.iter().all(|e| *e >= 0.0),
            "RR epsilons must be >= 0",
        )?;
        ensure(
            self.baselines.qpm_betas.iter().chain(&self.recsys_betas).all(|b| *b >= 0.0),
            "budgets must be >= 0",
        )?;
        ensure(self.baselines.qpm_k >= 1, "baselines.qpm_k must be >= 1")?;
        self.mf.validate()?;
        ensure(self.top_n >= 1, "top_n must be >= 1")?;
        ensure(
            self.synth.d >= 1 && self.synth.m >= 2 && self.synth.n >= 1,
            "synth needs d >= 1, m >= 2, n >= 1",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.synth.signal) && self.synth.sparsity >= 1.0 && self.synth.sparsity <= self.synth.d as f64,
            "synth.signal must lie in [0, 1] and synth.sparsity in [1, d]",
        )?;
        Ok(())
    }
}
