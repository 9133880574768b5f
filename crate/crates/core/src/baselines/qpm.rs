use rand::Rng;

use super::Codebook;
use crate::dataset::Dataset;
use crate::domain::{l0_norm, PublicVector, RatingGrid};
use crate::error::{Error, Result};
use crate::gametheory::{solve_game_lp, JointDistribution, LossSpecs, ObfuscationMatrix};

/// Quantizer plus an obfuscation mapping over centroid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct QpmDefense {
    pub codebook: Codebook,
    pub mapping: ObfuscationMatrix,
}

/// Fit the mapping: the joint is the empirical `Pr(s, centroid)` of the
/// labeled training set, privacy loss is 0-1 and utility loss is the L0
/// distance between grid-snapped centroids.
pub fn qpm_fit(train: &Dataset, codebook: Codebook, beta: f64) -> Result<QpmDefense> {
    let labels = train.labels()?;
    let k = codebook.k();
    let mut joint = vec![vec![0.0; k]; train.m()];
    let w = 1.0 / train.len() as f64;
    for (row, &s) in train.rows().iter().zip(&labels) {
        joint[s][codebook.assign(&row.x)] += w;
    }
    let snapped: Vec<PublicVector> = codebook
        .centroids
        .iter()
        .map(|c| PublicVector::snapped(c, train.grid()))
        .collect();
    let d_q: Vec<Vec<f64>> = snapped
        .iter()
        .map(|a| snapped.iter().map(|b| l0_norm(&a.diff(b)) as f64).collect())
        .collect();
    let joint = JointDistribution::new(&joint)?;
    let losses = LossSpecs::zero_one(train.m(), &d_q)?;
    let (mapping, _) = solve_game_lp(&joint, &losses, beta)?;
    Ok(QpmDefense { codebook, mapping })
}

/// Map `x` to its centroid, draw an output centroid from that row of the
/// mapping, and emit it snapped to the grid.
pub fn qpm_defend<R: Rng + ?Sized>(
    x: &PublicVector,
    codebook: &Codebook,
    mapping: &ObfuscationMatrix,
    grid: &RatingGrid,
    rng: &mut R,
) -> Result<(PublicVector, usize)> {
    let d = codebook.centroids[0].len();
    if x.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.dim(),
        });
    }
    if mapping.n() != codebook.k() {
        return Err(Error::DimensionMismatch {
            expected: codebook.k(),
            got: mapping.n(),
        });
    }
    let row = mapping.row(codebook.assign(x));
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut out = row.len() - 1;
    for (j, &q) in row.iter().enumerate() {
        cum += q;
        if q > 0.0 && u < cum {
            out = j;
            break;
        }
    }
    Ok((PublicVector::snapped(&codebook.centroids[out], grid), out))
}
