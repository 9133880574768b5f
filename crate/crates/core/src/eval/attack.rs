use serde::{Deserialize, Serialize};

use crate::classify::{
    accuracy, adversarial_training, baseline_most_popular, train_linear, train_mlp, LinearSoftmaxModel, MlpModel,
    MostPopular, Predictor, RegionClassifier, TrainConfig,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Accuracy of an attacker on a (possibly defended) labeled set.
pub fn run_attack<P: Predictor + ?Sized>(attacker: &P, defended: &Dataset) -> Result<f64> {
    accuracy(attacker, defended)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    /// Most popular label.
    #[serde(rename = "BA-A")]
    Baseline,
    /// Multi-class logistic regression.
    #[serde(rename = "LR-A")]
    Logistic,
    /// Three-layer ReLU network.
    #[serde(rename = "NN-A")]
    Network,
    /// Network retrained on defended training data.
    #[serde(rename = "AT-A")]
    AdversarialTraining,
    /// Majority vote of the network over a small hypercube.
    #[serde(rename = "RC-A")]
    RegionBased,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Baseline => "BA-A",
            AttackKind::Logistic => "LR-A",
            AttackKind::Network => "NN-A",
            AttackKind::AdversarialTraining => "AT-A",
            AttackKind::RegionBased => "RC-A",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackerSettings {
    pub train: TrainConfig,
    pub hidden: usize,
    pub rc_radius: f64,
    pub rc_samples: usize,
}

impl Default for AttackerSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                seed: 1,
                ..TrainConfig::default()
            },
            hidden: 64,
            rc_radius: 0.05,
            rc_samples: 100,
        }
    }
}

/// Attackers trained on the attacker's fold. AT-A is trained lazily per
/// defended training set, since it depends on the budget.
pub struct AttackSuite {
    pub kinds: Vec<AttackKind>,
    pub settings: AttackerSettings,
    pub seed: SeedSpec,
    pub baseline: MostPopular,
    pub logistic: Option<LinearSoftmaxModel>,
    pub network: Option<MlpModel>,
}

impl AttackSuite {
    pub fn train(kinds: &[AttackKind], fold: &Dataset, settings: AttackerSettings, seed: SeedSpec) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidConfig("at least one attacker is required".into()));
        }
        let baseline = baseline_most_popular(&fold.labels()?)?;
        let logistic = kinds
            .contains(&AttackKind::Logistic)
            .then(|| train_linear(fold, &settings.train))
            .transpose()?;
        let needs_nn = kinds.contains(&AttackKind::Network) || kinds.contains(&AttackKind::RegionBased);
        let network = needs_nn
            .then(|| train_mlp(fold, &settings.train, settings.hidden))
            .transpose()?;
        Ok(Self {
            kinds: kinds.to_vec(),
            settings,
            seed,
            baseline,
            logistic,
            network,
        })
    }

    pub fn needs_adversarial_training(&self) -> bool {
        self.kinds.contains(&AttackKind::AdversarialTraining)
    }

    /// Accuracy of every attacker on `test`, in `kinds` order. `defended_fold`
    /// is the attacker's fold after defense, used only by AT-A.
    pub fn evaluate(&self, test: &Dataset, defended_fold: Option<&Dataset>) -> Result<Vec<(AttackKind, f64)>> {
        self.kinds
            .iter()
            .map(|&kind| {
                let acc = match kind {
                    AttackKind::Baseline => run_attack(&self.baseline, test)?,
                    AttackKind::Logistic => run_attack(self.logistic.as_ref().unwrap(), test)?,
                    AttackKind::Network => run_attack(self.network.as_ref().unwrap(), test)?,
                    AttackKind::RegionBased => {
                        let rc = RegionClassifier {
                            model: self.network.clone().unwrap(),
                            radius: self.settings.rc_radius,
                            n_samples: self.settings.rc_samples,
                            seed: self.seed,
                        };
                        run_attack(&rc, test)?
                    }
                    AttackKind::AdversarialTraining => {
                        let fold = defended_fold.ok_or_else(|| {
                            Error::InvalidConfig("AT-A needs the defended training fold".into())
                        })?;
                        let model = adversarial_training(fold, &self.settings.train, self.settings.hidden, |row| {
                            Ok(row.x.clone())
                        })?;
                        run_attack(&model, test)?
                    }
                };
                Ok((kind, acc))
            })
            .collect()
    }
}
