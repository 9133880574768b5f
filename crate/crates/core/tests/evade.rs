use attrishield::classify::{Classifier, LinearSoftmaxModel, MlpModel, Model};
use attrishield::domain::{apply_noise, l0_norm, policy_feasible_indices, NoiseTypePolicy, PublicVector, RatingGrid};
use attrishield::evade::{find_all_noises, run_method, EvasionMethod, PandaConfig};
use attrishield::seed::SeedSpec;
use proptest::prelude::*;
use rand::Rng;

const D: usize = 12;
const M: usize = 3;

fn random_model(seed: u64, mlp: bool) -> Model {
    let mut rng = SeedSpec::new(seed).stream("model");
    if mlp {
        Model::Mlp(MlpModel::init(D, 10, M, &mut rng))
    } else {
        let rows: Vec<Vec<f64>> = (0..M).map(|_| (0..D).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        Model::Linear(LinearSoftmaxModel::from_rows(&rows, vec![0.0; M]))
    }
}

fn random_user(seed: u64, grid: &RatingGrid) -> PublicVector {
    let mut rng = SeedSpec::new(seed).stream("user");
    let x: Vec<f64> = (0..D)
        .map(|_| if rng.random_bool(0.4) { grid.values()[rng.random_range(1..grid.len())] } else { 0.0 })
        .collect();
    PublicVector::new(x, grid).unwrap()
}

fn policy() -> impl Strategy<Value = NoiseTypePolicy> {
    prop_oneof![
        Just(NoiseTypePolicy::ModifyExist),
        Just(NoiseTypePolicy::AddNew),
        Just(NoiseTypePolicy::ModifyAdd),
    ]
}

fn method() -> impl Strategy<Value = EvasionMethod> {
    prop_oneof![Just(EvasionMethod::Panda), Just(EvasionMethod::Jsma), Just(EvasionMethod::Fgsm)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn noises_respect_policy_grid_and_cost(
        model_seed in any::<u64>(),
        user_seed in any::<u64>(),
        mlp in any::<bool>(),
        policy in policy(),
        method in method(),
        tau in prop_oneof![Just(0.2), Just(0.6), Just(1.0)],
    ) {
        let grid = RatingGrid::default();
        let model = random_model(model_seed, mlp);
        let x = random_user(user_seed, &grid);
        let cfg = PandaConfig { tau, max_iters: 50, policy };
        // The comparison methods always run under ModifyAdd.
        let effective = if method == EvasionMethod::Panda { policy } else { NoiseTypePolicy::ModifyAdd };
        let allowed = policy_feasible_indices(&x, effective);
        for target in 0..M {
            let r = run_method(method, &model, &x, target, &cfg, 1.0, &grid);
            prop_assert_eq!(r.target, target);
            prop_assert_eq!(r.l0_cost, l0_norm(&r.noise.0));
            if r.success && target == model.predict(&x) {
                prop_assert_eq!(r.l0_cost, 0);
            }
            for (k, &v) in r.noise.0.iter().enumerate() {
                if v != 0.0 {
                    prop_assert!(allowed.contains(&k), "index {} touched under {:?}", k, policy);
                }
            }
            let noisy = apply_noise(&x, &r.noise, &grid).unwrap();
            prop_assert!(noisy.iter().all(|v| grid.contains(*v)));
            if r.success {
                prop_assert_eq!(model.predict(&noisy), target);
            }
            prop_assert_eq!(&r, &run_method(method, &model, &x, target, &cfg, 1.0, &grid));
        }
    }

    #[test]
    fn find_all_is_deterministic_and_complete(model_seed in any::<u64>(), user_seed in any::<u64>()) {
        let grid = RatingGrid::default();
        let model = random_model(model_seed, false);
        let x = random_user(user_seed, &grid);
        let cfg = PandaConfig::default();
        let a = find_all_noises(&model, &x, &cfg, &grid);
        prop_assert_eq!(a.len(), M);
        prop_assert_eq!(&a, &find_all_noises(&model, &x, &cfg, &grid));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        prop_assert_eq!(&a, &pool.install(|| find_all_noises(&model, &x, &cfg, &grid)));
    }
}
