//! Rating-grid arithmetic and the vector types every other module shares.

use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::error::{Error, Result};

/// Entries with magnitude at or below this are treated as unmodified.
pub const L0_THRESHOLD: f64 = 1e-12;

/// Tolerance for deciding that a float sits on a grid level.
pub const GRID_TOL: f64 = 1e-9;

/// Attribute value, 0-based. Rendered 1-based in CSV output.
pub type Label = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RatingGrid {
    values: Vec<f64>,
}

impl RatingGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid("need at least 2 levels".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidGrid("levels must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("levels must be strictly increasing".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidGrid("grid must contain 0.0".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// Levels other than zero.
    pub fn nonzero_levels(&self) -> &[f64] {
        &self.values[1..]
    }

    /// Index of the level nearest to `v`; exact ties go to the lower level.
    pub fn nearest_index(&self, v: f64) -> usize {
        let pos = self.values.partition_point(|&g| g < v);
        if pos == 0 {
            return 0;
        }
        if pos == self.values.len() {
            return pos - 1;
        }
        let below = v - self.values[pos - 1];
        let above = self.values[pos] - v;
        if below <= above + L0_THRESHOLD {
            pos - 1
        } else {
            pos
        }
    }

    pub fn round(&self, v: f64) -> f64 {
        self.values[self.nearest_index(v)]
    }

    /// Position of `v` on the grid, if it is a level (within [`GRID_TOL`]).
    pub fn level_of(&self, v: f64) -> Option<usize> {
        let i = self.nearest_index(v);
        ((self.values[i] - v).abs() <= GRID_TOL).then_some(i)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.level_of(v).is_some()
    }
}

impl Default for RatingGrid {
    fn default() -> Self {
        Self {
            values: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

impl TryFrom<Vec<f64>> for RatingGrid {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<RatingGrid> for Vec<f64> {
    fn from(g: RatingGrid) -> Self {
        g.values
    }
}

/// Nearest grid level to `v`.
pub fn round_to_grid(v: f64, grid: &RatingGrid) -> f64 {
    grid.round(v)
}

/// A user's public data. Every entry is exactly a grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicVector(Vec<f64>);

impl PublicVector {
    /// Validates membership and snaps each entry to the exact grid level.
    pub fn new(entries: Vec<f64>, grid: &RatingGrid) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("public vector must have d >= 1".into()));
        }
        let mut entries = entries;
        for (index, v) in entries.iter_mut().enumerate() {
            match grid.level_of(*v) {
                Some(level) => *v = grid.values()[level],
                None => return Err(Error::OffGrid { index, value: *v }),
            }
        }
        Ok(Self(entries))
    }

    /// Snap arbitrary reals into [0, 1] and onto the grid.
    pub fn snapped(entries: &[f64], grid: &RatingGrid) -> Self {
        Self(
            entries
                .iter()
                .map(|v| grid.round(v.clamp(0.0, 1.0)))
                .collect(),
        )
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Noise that carries `self` to `other`.
    pub fn diff(&self, other: &PublicVector) -> NoiseVector {
        NoiseVector(other.0.iter().zip(&self.0).map(|(a, b)| a - b).collect())
    }
}

impl Deref for PublicVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector(pub Vec<f64>);

impl NoiseVector {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l0(&self) -> usize {
        l0_norm(self)
    }

    pub fn l2(&self) -> f64 {
        l2_norm(self)
    }
}

impl Deref for NoiseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn l0_norm(r: &[f64]) -> usize {
    r.iter().filter(|v| v.abs() > L0_THRESHOLD).count()
}

pub fn l2_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `x + r`, clipped to [0, 1] and snapped to the grid entrywise.
pub fn apply_noise(x: &PublicVector, r: &NoiseVector, grid: &RatingGrid) -> Result<PublicVector> {
    if x.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: r.dim(),
        });
    }
    Ok(PublicVector(
        x.iter()
            .zip(r.iter())
            .map(|(a, b)| grid.round((a + b).clamp(0.0, 1.0)))
            .collect(),
    ))
}

/// Validate that `p` is a probability vector within `1e-9` of summing to one.
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "entry {i} is negative or not finite"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// KL(p || q) in nats, with 0 ln(0/q) = 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::InfiniteDivergence { index: i });
        }
        kl += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative sum for p ~= q.
    Ok(kl.max(0.0))
}

/// Which entries of a user's public data the defender may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTypePolicy {
    /// Only entries that are already nonzero.
    ModifyExist,
    /// Only entries that are currently zero.
    AddNew,
    /// Any entry.
    ModifyAdd,
}

impl NoiseTypePolicy {
    pub fn allows(&self, original: f64) -> bool {
        match self {
            NoiseTypePolicy::ModifyExist => original != 0.0,
            NoiseTypePolicy::AddNew => original == 0.0,
            NoiseTypePolicy::ModifyAdd => true,
        }
    }
}

pub fn policy_feasible_indices(x: &PublicVector, policy: NoiseTypePolicy) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, &v)| policy.allows(v))
        .map(|(k, _)| k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn grid() -> RatingGrid {
        RatingGrid::default()
    }

    fn pv(v: &[f64]) -> PublicVector {
        PublicVector::new(v.to_vec(), &grid()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(RatingGrid::new(vec![0.0]).is_err());
        assert!(RatingGrid::new(vec![0.0, 0.5, 0.4]).is_err());
        assert!(RatingGrid::new(vec![0.1, 0.5]).is_err());
        assert!(RatingGrid::new(vec![0.0, 1.5]).is_err());
        assert!(RatingGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn l0_examples() {
        assert_eq!(l0_norm(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(l0_norm(&[0.2, 0.0, -0.4]), 2);
        assert_eq!(l0_norm(&[1e-13, 0.0]), 0);
    }

    #[test]
    fn l0_matches_generated_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let d = rng.random_range(1..50);
            let k = rng.random_range(0..=d);
            let mut r = vec![0.0; d];
            let idx = rand::seq::index::sample(&mut rng, d, k);
            for i in idx.iter() {
                let mag = rng.random_range(0.01..1.0);
                r[i] = if rng.random_bool(0.5) { mag } else { -mag };
            }
            assert_eq!(l0_norm(&r), k);
        }
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_norm(&[0.0, 0.0]), 0.0);
        assert!((l2_norm(&[0.6, 0.8]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l2_matches_compensated_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let r: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Kahan-summed squares as the reference
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for v in &r {
                let y = v * v - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            assert!((l2_norm(&r) - sum.sqrt()).abs() <= 1e-12);
        }
    }

    #[test]
    fn round_examples() {
        let g = grid();
        assert_eq!(round_to_grid(0.2, &g), 0.2);
        assert_eq!(round_to_grid(0.29, &g), 0.2);
        assert_eq!(round_to_grid(0.3, &g), 0.2);
        assert_eq!(round_to_grid(0.31, &g), 0.4);
        assert_eq!(round_to_grid(-0.3, &g), 0.0);
        assert_eq!(round_to_grid(1.7, &g), 1.0);
        assert_eq!(round_to_grid(0.1, &g), 0.0);
    }

    #[test]
    fn apply_noise_examples() {
        let g = grid();
        let x = pv(&[0.2, 0.0]);
        assert_eq!(
            apply_noise(&x, &NoiseVector(vec![0.0, 0.0]), &g).unwrap(),
            x
        );
        assert_eq!(
            apply_noise(&x, &NoiseVector(vec![0.2, 1.0]), &g).unwrap().as_slice(),
            &[0.4, 1.0]
        );
        let x = pv(&[1.0]);
        assert_eq!(
            apply_noise(&x, &NoiseVector(vec![0.5]), &g).unwrap().as_slice(),
            &[1.0]
        );
        assert!(matches!(
            apply_noise(&x, &NoiseVector(vec![0.5, 0.0]), &g),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let v = kl_divergence(&[0.9, 0.1], &[0.5, 0.5]).unwrap();
        // 0.9 ln 1.8 + 0.1 ln 0.2
        let oracle = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.368064).abs() < 1e-6);
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::InfiniteDivergence { index: 1 })
        ));
    }

    #[test]
    fn feasible_index_examples() {
        let x = pv(&[0.2, 0.0, 1.0]);
        assert_eq!(policy_feasible_indices(&x, NoiseTypePolicy::ModifyExist), vec![0, 2]);
        assert_eq!(policy_feasible_indices(&x, NoiseTypePolicy::AddNew), vec![1]);
        assert_eq!(policy_feasible_indices(&x, NoiseTypePolicy::ModifyAdd), vec![0, 1, 2]);
    }

    fn grid_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0usize..6, d).prop_map(|v| v.into_iter().map(|i| i as f64 * 0.2).collect())
    }

    proptest! {
        #[test]
        fn apply_noise_is_grid_valid(x in grid_vec(12), r in proptest::collection::vec(-2.0f64..2.0, 12)) {
            let g = grid();
            let x = PublicVector::new(x, &g).unwrap();
            let out = apply_noise(&x, &NoiseVector(r), &g).unwrap();
            prop_assert!(out.iter().all(|v| g.values().contains(v)));
        }

        #[test]
        fn round_is_idempotent(v in -1.0f64..2.0) {
            let g = grid();
            prop_assert_eq!(g.round(g.round(v)), g.round(v));
        }

        #[test]
        fn kl_nonnegative_and_zero_iff_equal(a in proptest::collection::vec(0.01f64..1.0, 4), b in proptest::collection::vec(0.01f64..1.0, 4)) {
            let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); v.into_iter().map(|x| x / s).collect::<Vec<_>>() };
            let (p, q) = (norm(a), norm(b));
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            let maxdiff = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if maxdiff > 1e-6 { prop_assert!(kl > 0.0); }
            prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn policies_partition_indices(x in grid_vec(15)) {
            let x = PublicVector::new(x, &grid()).unwrap();
            let exist = policy_feasible_indices(&x, NoiseTypePolicy::ModifyExist);
            let new = policy_feasible_indices(&x, NoiseTypePolicy::AddNew);
            prop_assert!(exist.iter().all(|k| !new.contains(k)));
            let mut all: Vec<_> = exist.into_iter().chain(new).collect();
            all.sort();
            prop_assert_eq!(all, policy_feasible_indices(&x, NoiseTypePolicy::ModifyAdd));
        }
    }
}
