//! Experiment harness: attackers, defended-set construction, budget sweeps,
//! evasion benchmarks and the recommender utility check.

mod attack;
mod evasion;
mod experiment;
mod mf;
mod sweep;

pub use attack::{run_attack, AttackKind, AttackSuite, AttackerSettings};
pub use evasion::{evasion_benchmark, EvasionSummary};
pub use mf::{
    holdout_split, mf_predict, mf_topn_precision, mf_train, relative_precision_loss, remove_items, MfConfig, MfModel,
    HOLDOUT_PER_USER,
};
pub use sweep::{
    defend_dataset, noise_stats, phase_one, sweep_budget, write_sweep_csv, DefendedSet, PhaseOneCache, SweepResult,
    SweepRow,
};
pub use experiment::{
    baseline_sweep, defend_rows, make_folds, recsys_eval, target_for, train_defender, write_baseline_csv,
    write_recsys_csv, BaselineDefense, BaselineRow, BaselineSettings, DefenderKind, Folds, RecsysRow, TargetKind,
};
