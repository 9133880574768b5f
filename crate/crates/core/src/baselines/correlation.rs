use crate::classify::LinearSoftmaxModel;
use crate::domain::{Label, PublicVector, RatingGrid};
use crate::error::{Error, Result};

/// Fill in the `k` currently-unrated items most indicative of some other
/// attribute value, scoring item `j` by `max_{i != true_label} W[i][j]`.
/// Returns the new vector and how many entries were set, which is below `k`
/// when fewer zero entries exist.
pub fn correlation_defend(
    x: &PublicVector,
    true_label: Label,
    k: usize,
    model: &LinearSoftmaxModel,
    grid: &RatingGrid,
) -> Result<(PublicVector, usize)> {
    if model.d != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            got: x.dim(),
        });
    }
    if true_label >= model.m {
        return Err(Error::LabelOutOfRange {
            label: true_label,
            m: model.m,
        });
    }
    let mut candidates: Vec<(usize, f64)> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == 0.0)
        .map(|(j, _)| {
            let score = (0..model.m)
                .filter(|&i| i != true_label)
                .map(|i| model.row(i)[j])
                .fold(f64::NEG_INFINITY, f64::max);
            (j, score)
        })
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = x.to_vec();
    let chosen = k.min(candidates.len());
    for &(j, _) in &candidates[..chosen] {
        out[j] = grid.max();
    }
    Ok((PublicVector::new(out, grid)?, chosen))
}
