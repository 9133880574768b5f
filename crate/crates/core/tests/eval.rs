use attrishield::baselines::RrConfig;
use attrishield::classify::{accuracy, train_linear, Model, TrainConfig};
use attrishield::dataset::{synth_generate, SynthConfig};
use attrishield::domain::RatingGrid;
use attrishield::eval::{
    make_folds, recsys_eval, run_attack, sweep_budget, train_defender, AttackKind, AttackSuite, AttackerSettings,
    BaselineDefense, DefenderKind, Folds, MfConfig,
};
use attrishield::evade::PandaConfig;
use attrishield::mechanism::target_uniform;
use attrishield::seed::SeedSpec;

fn suite(seed: u64, n: usize) -> (Folds, Model, AttackSuite) {
    let seed = SeedSpec::new(seed);
    let grid = RatingGrid::default();
    let synth = SynthConfig {
        n,
        ..SynthConfig::default()
    };
    let ds = synth_generate(&synth, &grid, seed.derive("synth")).unwrap();
    let folds = make_folds(&ds, 0.1, 0.0, seed).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let defender = train_defender(&folds.defender, DefenderKind::Linear, &cfg, 16).unwrap();
    let settings = AttackerSettings {
        train: cfg,
        hidden: 16,
        ..AttackerSettings::default()
    };
    let attackers = AttackSuite::train(
        &[AttackKind::Baseline, AttackKind::Logistic],
        &folds.attacker,
        settings,
        seed.derive("attackers"),
    )
    .unwrap();
    (folds, defender, attackers)
}

#[test]
fn undefended_attack_is_plain_accuracy() {
    let (folds, defender, _) = suite(1, 1200);
    assert_eq!(run_attack(&defender, &folds.test).unwrap(), accuracy(&defender, &folds.test).unwrap());
}

#[test]
fn sweep_rows_follow_the_budget() {
    let (folds, defender, attackers) = suite(2, 1200);
    let p = target_uniform(folds.test.m()).unwrap();
    let betas = [0.0, 1.0, 2.0, 4.0, 8.0];
    let result = sweep_budget(
        &defender,
        &attackers,
        &folds.attacker,
        &folds.test,
        &betas,
        &p,
        &PandaConfig::default(),
        SeedSpec::new(3),
    )
    .unwrap();
    assert_eq!(result.rows.len(), betas.len() * 2);

    let undefended = run_attack(attackers.logistic.as_ref().unwrap(), &folds.test).unwrap();
    assert_eq!(result.accuracy(0.0, "LR-A"), Some(undefended));
    let baseline = result.accuracy(0.0, "BA-A").unwrap();
    for row in &result.rows {
        assert!((0.0..=1.0).contains(&row.accuracy));
        assert!(row.mean_l0 <= row.beta + 0.5, "beta {} mean l0 {}", row.beta, row.mean_l0);
        if row.beta == 0.0 {
            assert_eq!(row.mean_l0, 0.0);
        }
        if row.attack == "BA-A" {
            assert_eq!(row.accuracy, baseline);
        }
    }
    let lr: Vec<f64> = betas.iter().map(|&b| result.accuracy(b, "LR-A").unwrap()).collect();
    for w in lr.windows(2) {
        assert!(w[1] <= w[0] + 0.05, "{lr:?}");
    }
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let (folds, defender, attackers) = suite(4, 800);
    let p = target_uniform(folds.test.m()).unwrap();
    let run = || {
        sweep_budget(
            &defender,
            &attackers,
            &folds.attacker,
            &folds.test,
            &[0.0, 2.0, 5.0],
            &p,
            &PandaConfig::default(),
            SeedSpec::new(5),
        )
        .unwrap()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
    assert_eq!(one, four);
    assert_eq!(one, run());
}

#[test]
fn sweep_rejects_bad_budgets() {
    let (folds, defender, attackers) = suite(6, 400);
    let p = target_uniform(folds.test.m()).unwrap();
    for betas in [&[][..], &[2.0, 1.0][..], &[-1.0][..]] {
        assert!(sweep_budget(
            &defender,
            &attackers,
            &folds.attacker,
            &folds.test,
            betas,
            &p,
            &PandaConfig::default(),
            SeedSpec::new(0)
        )
        .is_err());
    }
}

#[test]
fn fully_randomized_data_leaves_only_the_baseline() {
    let (folds, _, attackers) = suite(7, 1200);
    let rr = BaselineDefense::Rr(RrConfig {
        epsilon: 0.0,
        grid: folds.test.grid().clone(),
    });
    let (defended, _) = rr.apply(&folds.test, SeedSpec::new(8)).unwrap();
    let scores = attackers.evaluate(&defended, None).unwrap();
    let clean = attackers.evaluate(&folds.test, None).unwrap();
    assert_eq!(scores[0].1, clean[0].1);
    assert!(scores[1].1 <= scores[0].1 + 0.1, "{scores:?}");
}

#[test]
fn recsys_rows_start_with_the_clean_reference() {
    let (folds, _, _) = suite(9, 400);
    let rr = BaselineDefense::Rr(RrConfig {
        epsilon: 1.0,
        grid: folds.defender.grid().clone(),
    });
    let (noisy, _) = rr.apply(&folds.defender, SeedSpec::new(10)).unwrap();
    let mf = MfConfig {
        epochs: 5,
        ..MfConfig::default()
    };
    let rows = recsys_eval(
        &folds.defender,
        &[("same".into(), folds.defender.clone()), ("rr".into(), noisy)],
        &mf,
        10,
        SeedSpec::new(11),
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].method, "none");
    assert_eq!(rows[0].relative_loss, 0.0);
    // Same data, same holdout, same seed: identical precision.
    assert_eq!(rows[1].precision, rows[0].precision);
    assert!(rows.iter().all(|r| (0.0..=0.5).contains(&r.precision)));
}

#[test]
fn adversarially_trained_attacker_uses_the_defended_fold() {
    let (folds, _, _) = suite(12, 600);
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let linear = train_linear(&folds.defender, &cfg).unwrap();
    let settings = AttackerSettings {
        train: cfg,
        hidden: 8,
        ..AttackerSettings::default()
    };
    let at = AttackSuite::train(&[AttackKind::AdversarialTraining], &folds.attacker, settings, SeedSpec::new(1)).unwrap();
    assert!(at.needs_adversarial_training());
    assert!(at.evaluate(&folds.test, None).is_err());
    let p = target_uniform(folds.test.m()).unwrap();
    let result = sweep_budget(
        &linear,
        &at,
        &folds.attacker,
        &folds.test,
        &[0.0, 3.0],
        &p,
        &PandaConfig::default(),
        SeedSpec::new(2),
    )
    .unwrap();
    assert_eq!(result.rows.len(), 2);
    assert!(result.rows.iter().all(|r| r.attack == "AT-A"));
}
