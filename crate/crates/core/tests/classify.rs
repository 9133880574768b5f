use attrishield::classify::{
    accuracy, adversarial_training, baseline_most_popular, mean_loss, region_based_predict, train_linear, train_mlp,
    Classifier, LinearSoftmaxModel, MlpModel, Predictor, TrainConfig,
};
use attrishield::dataset::{Dataset, UserRow};
use attrishield::domain::{Label, PublicVector, RatingGrid};
use attrishield::seed::SeedSpec;
use rand::Rng;

fn dataset(points: &[(Vec<f64>, Label)], m: usize) -> Dataset {
    let grid = RatingGrid::default();
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, (x, y))| UserRow {
            user_id: format!("u{i}"),
            x: PublicVector::new(x.clone(), &grid).unwrap(),
            label: Some(*y),
        })
        .collect();
    Dataset::new(points[0].0.len(), m, grid, rows).unwrap()
}

fn separable_toy() -> Dataset {
    let mut pts = Vec::new();
    for i in 0..10 {
        let a = (i % 5) as f64 * 0.2;
        pts.push((vec![a.min(0.4), 1.0 - (i % 3) as f64 * 0.2], 0));
        pts.push((vec![1.0 - (i % 3) as f64 * 0.2, a.min(0.4)], 1));
    }
    dataset(&pts, 2)
}

fn random_linear(rng: &mut impl Rng, d: usize, m: usize) -> LinearSoftmaxModel {
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    LinearSoftmaxModel::from_rows(&rows, (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn decision_scores_examples() {
    let zero = LinearSoftmaxModel::zeros(3, 4);
    assert_eq!(zero.decision_scores(&[0.2, 0.4, 1.0]), vec![0.25; 4]);

    let hand = LinearSoftmaxModel::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]], vec![0.0, 0.0]);
    let c = hand.decision_scores(&[1.0, 0.0]);
    assert!((c[0] - 0.73106).abs() <= 1e-5);
    assert!((c[1] - 0.26894).abs() <= 1e-5);

    let mut rng = SeedSpec::new(3).stream("scores");
    for _ in 0..200 {
        let model = random_linear(&mut rng, 6, 5);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..=1.0)).collect();
        let s: f64 = model.decision_scores(&x).iter().sum();
        assert!((s - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn linear_margin_gradient_is_row_difference() {
    let mut rng = SeedSpec::new(4).stream("margin");
    let model = random_linear(&mut rng, 5, 3);
    let x = [0.0, 0.2, 1.0, 0.4, 0.8];
    let g1 = model.logit_gradient(&x, 1);
    let g0 = model.logit_gradient(&x, 0);
    for k in 0..5 {
        assert_eq!(g1[k] - g0[k], model.row(1)[k] - model.row(0)[k]);
    }
}

#[test]
fn linear_gradient_matches_finite_differences() {
    let mut rng = SeedSpec::new(5).stream("fd-linear");
    let h = 1e-6;
    for _ in 0..1000 {
        let model = random_linear(&mut rng, 4, 3);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..0.9)).collect();
        let i = rng.random_range(0..3);
        let g = model.input_gradient(&x, i);
        for k in 0..4 {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (model.decision_scores(&up)[i] - model.decision_scores(&down)[i]) / (2.0 * h);
            assert!(rel_err(g[k], fd) <= 1e-5, "analytic {} vs fd {}", g[k], fd);
        }
    }
}

#[test]
fn mlp_gradient_matches_finite_differences_away_from_kinks() {
    let mut rng = SeedSpec::new(6).stream("fd-mlp");
    let h = 1e-6;
    let mut checked = 0;
    while checked < 1000 {
        let model = MlpModel::init(4, 8, 3, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..=1.0)).collect();
        let pre = model.hidden_pre(&x);
        if pre.iter().any(|z| z.abs() < 1e-3) {
            continue;
        }
        let i = rng.random_range(0..3);
        let g = model.input_gradient(&x, i);
        for k in 0..4 {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (model.decision_scores(&up)[i] - model.decision_scores(&down)[i]) / (2.0 * h);
            assert!(rel_err(g[k], fd) <= 1e-3, "analytic {} vs fd {}", g[k], fd);
        }
        checked += 1;
    }
}

#[test]
fn zero_epochs_returns_initial_models() {
    let ds = separable_toy();
    let cfg = TrainConfig {
        epochs: 0,
        seed: 9,
        ..TrainConfig::default()
    };
    assert_eq!(train_linear(&ds, &cfg).unwrap(), LinearSoftmaxModel::zeros(2, 2));
    let init = MlpModel::init(2, 8, 2, &mut SeedSpec::new(9).stream("mlp-init"));
    assert_eq!(train_mlp(&ds, &cfg, 8).unwrap(), init);
}

#[test]
fn separable_toy_is_learned() {
    let ds = separable_toy();
    assert_eq!(ds.len(), 20);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 4,
        learning_rate: 0.5,
        l2_penalty: 0.0,
        seed: 1,
    };
    let model = train_linear(&ds, &cfg).unwrap();
    assert_eq!(accuracy(&model, &ds).unwrap(), 1.0);
}

#[test]
fn xor_is_learned_by_mlp() {
    let ds = dataset(
        &[
            (vec![0.0, 0.0], 0),
            (vec![0.0, 1.0], 1),
            (vec![1.0, 0.0], 1),
            (vec![1.0, 1.0], 0),
        ],
        2,
    );
    let cfg = TrainConfig {
        epochs: 2000,
        batch_size: 4,
        learning_rate: 0.5,
        l2_penalty: 0.0,
        seed: 2,
    };
    let model = train_mlp(&ds, &cfg, 8).unwrap();
    assert_eq!(accuracy(&model, &ds).unwrap(), 1.0);
}

#[test]
fn training_is_deterministic() {
    let ds = separable_toy();
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 3,
        seed: 4,
        ..TrainConfig::default()
    };
    let a = train_linear(&ds, &cfg).unwrap();
    let b = train_linear(&ds, &cfg).unwrap();
    assert_eq!(a.w.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.w.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.b.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(train_mlp(&ds, &cfg, 6).unwrap(), train_mlp(&ds, &cfg, 6).unwrap());
}

#[test]
fn training_errors() {
    let ds = separable_toy();
    let bad_lr = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    assert!(train_linear(&ds, &bad_lr).is_err());
    let bad_batch = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(train_mlp(&ds, &bad_batch, 4).is_err());
    let grid = RatingGrid::default();
    let unlabeled = Dataset::new(
        2,
        2,
        grid.clone(),
        vec![UserRow {
            user_id: "a".into(),
            x: PublicVector::new(vec![0.0, 1.0], &grid).unwrap(),
            label: None,
        }],
    )
    .unwrap();
    assert!(train_linear(&unlabeled, &TrainConfig::default()).is_err());
}

#[test]
fn full_batch_loss_is_monotone() {
    let ds = separable_toy();
    let mut prev = f64::INFINITY;
    for epochs in 0..60 {
        let cfg = TrainConfig {
            epochs,
            batch_size: ds.len(),
            learning_rate: 1e-2,
            l2_penalty: 1e-3,
            seed: 0,
        };
        let model = train_linear(&ds, &cfg).unwrap();
        let loss = mean_loss(&model, &[&model.w], &ds, cfg.l2_penalty).unwrap();
        assert!(loss <= prev + 1e-9, "epoch {epochs}: {loss} > {prev}");
        prev = loss;
    }
}

#[test]
fn most_popular_baseline() {
    assert_eq!(baseline_most_popular(&[0, 0, 1]).unwrap().label, 0);
    assert_eq!(baseline_most_popular(&[1, 1, 0, 0]).unwrap().label, 0);
    assert!(baseline_most_popular(&[]).is_err());

    let labels: Vec<Label> = vec![2, 1, 2, 0, 2, 1, 2, 2, 0, 1];
    let pts: Vec<(Vec<f64>, Label)> = labels.iter().map(|&l| (vec![0.0], l)).collect();
    let ds = dataset(&pts, 3);
    let base = baseline_most_popular(&labels).unwrap();
    assert_eq!(accuracy(&base, &ds).unwrap(), 0.5);
}

#[test]
fn accuracy_examples() {
    struct Oracle(Vec<Label>);
    impl Predictor for Oracle {
        fn predict_row(&self, user_id: &str, _x: &[f64]) -> Label {
            self.0[user_id[1..].parse::<usize>().unwrap()]
        }
    }
    struct Constant;
    impl Predictor for Constant {
        fn predict_row(&self, _: &str, _: &[f64]) -> Label {
            0
        }
    }
    let labels = vec![0, 1, 1, 1];
    let ds = dataset(&labels.iter().map(|&l| (vec![0.0], l)).collect::<Vec<_>>(), 2);
    assert_eq!(accuracy(&Oracle(labels), &ds).unwrap(), 1.0);
    assert_eq!(accuracy(&Constant, &ds).unwrap(), 0.25);

    struct Coin;
    impl Predictor for Coin {
        fn predict_row(&self, user_id: &str, _: &[f64]) -> Label {
            SeedSpec::new(8).user_stream("coin", user_id).random_range(0..4)
        }
    }
    let n = 10_000;
    let ds = dataset(&(0..n).map(|i| (vec![0.0], i % 4)).collect::<Vec<_>>(), 4);
    let acc = accuracy(&Coin, &ds).unwrap();
    let sigma = (0.25_f64 * 0.75 / n as f64).sqrt();
    assert!((acc - 0.25).abs() <= 3.0 * sigma, "{acc}");
}

#[test]
fn region_vote_with_zero_radius_is_predict() {
    let mut rng = SeedSpec::new(10).stream("region0");
    for _ in 0..1000 {
        let model = random_linear(&mut rng, 3, 4);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..=1.0)).collect();
        assert_eq!(region_based_predict(&model, &x, 0.0, 5, &mut rng), model.predict(&x));
    }
}

#[test]
fn region_vote_with_one_sample_predicts_that_sample() {
    let model = random_linear(&mut SeedSpec::new(11).stream("m"), 3, 3);
    let x = [0.5, 0.5, 0.5];
    let mut a = SeedSpec::new(12).stream("one");
    let mut b = SeedSpec::new(12).stream("one");
    let label = region_based_predict(&model, &x, 0.3, 1, &mut a);
    let p: Vec<f64> = x.iter().map(|&v| b.random_range((v - 0.3)..=(v + 0.3))).collect();
    assert_eq!(label, model.predict(&p));
}

#[test]
fn region_vote_fraction_matches_volume() {
    // Label 1 iff x_0 > 0.52; the cube around 0.5 with radius 0.05 puts 30%
    // of its volume past the boundary.
    let model = LinearSoftmaxModel::from_rows(&[vec![0.0], vec![1.0]], vec![0.0, -0.52]);
    let trials = 4000;
    let mut ones = 0;
    for t in 0..trials {
        let mut rng = SeedSpec::new(13).user_stream("vote", &t.to_string());
        ones += region_based_predict(&model, &[0.5], 0.05, 1, &mut rng);
    }
    let frac = ones as f64 / trials as f64;
    let sigma = (0.3_f64 * 0.7 / trials as f64).sqrt();
    assert!((frac - 0.3).abs() <= 3.0 * sigma, "{frac}");
}

#[test]
fn adversarial_training_examples() {
    let ds = separable_toy();
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 4,
        seed: 5,
        ..TrainConfig::default()
    };
    let clean = train_mlp(&ds, &cfg, 6).unwrap();
    let same = adversarial_training(&ds, &cfg, 6, |row| Ok(row.x.clone())).unwrap();
    assert_eq!(clean, same);

    let grid = ds.grid().clone();
    let flipped = adversarial_training(&ds, &cfg, 6, |row| {
        let x: Vec<f64> = row.x.iter().rev().copied().collect();
        PublicVector::new(x, &grid)
    })
    .unwrap();
    assert_eq!((flipped.d, flipped.h, flipped.m), (clean.d, clean.h, clean.m));
    assert_ne!(flipped.w1, clean.w1);
}
