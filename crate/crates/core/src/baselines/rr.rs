use rand::Rng;

use crate::domain::{PublicVector, RatingGrid};

/// Generalized randomized response over the grid levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RrConfig {
    pub epsilon: f64,
    pub grid: RatingGrid,
}

/// `e^eps / (e^eps + g - 1)`, computed without overflow.
pub fn keep_probability(epsilon: f64, g: usize) -> f64 {
    1.0 / (1.0 + (g as f64 - 1.0) * (-epsilon).exp())
}

/// Independently per entry: keep the level with [`keep_probability`],
/// otherwise report one of the other levels uniformly.
pub fn rr_defend<R: Rng + ?Sized>(x: &PublicVector, cfg: &RrConfig, rng: &mut R) -> PublicVector {
    let levels = cfg.grid.values();
    let g = levels.len();
    let keep = keep_probability(cfg.epsilon, g);
    let out: Vec<f64> = x
        .iter()
        .map(|&v| {
            let true_level = cfg.grid.nearest_index(v);
            if rng.random::<f64>() < keep {
                levels[true_level]
            } else {
                let mut other = rng.random_range(0..g - 1);
                if other >= true_level {
                    other += 1;
                }
                levels[other]
            }
        })
        .collect();
    PublicVector::snapped(&out, &cfg.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg(epsilon: f64) -> RrConfig {
        RrConfig { epsilon, grid: RatingGrid::default() }
    }

    #[test]
    fn keep_probability_closed_form() {
        assert!((keep_probability(5f64.ln(), 6) - 0.5).abs() < 1e-15);
        assert_eq!(keep_probability(1e9, 6), 1.0);
        assert!((keep_probability(0.0, 6) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn huge_epsilon_is_identity() {
        let grid = RatingGrid::default();
        let x = PublicVector::new(vec![0.0, 0.4, 1.0, 0.2], &grid).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(rr_defend(&x, &cfg(1e9), &mut rng), x);
    }

    #[test]
    fn zero_epsilon_is_uniform() {
        let grid = RatingGrid::default();
        let x = PublicVector::new(vec![0.4; 100], &grid).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 6];
        for _ in 0..100 {
            for v in rr_defend(&x, &cfg(0.0), &mut rng).iter() {
                counts[grid.nearest_index(*v)] += 1;
            }
        }
        let n: f64 = 10_000.0;
        let sigma = (n * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n / 6.0).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn keep_frequency_matches() {
        let grid = RatingGrid::default();
        let x = PublicVector::new(vec![0.0, 0.2, 0.6, 1.0], &grid).unwrap();
        let eps = 1.3;
        let p = keep_probability(eps, 6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (mut kept, mut total) = (0usize, 0usize);
        for _ in 0..3000 {
            let out = rr_defend(&x, &cfg(eps), &mut rng);
            assert!(out.iter().all(|v| grid.contains(*v)));
            kept += out.iter().zip(x.iter()).filter(|(a, b)| a == b).count();
            total += x.dim();
        }
        let sigma = (total as f64 * p * (1.0 - p)).sqrt();
        assert!((kept as f64 - p * total as f64).abs() <= 3.0 * sigma);
    }
}
