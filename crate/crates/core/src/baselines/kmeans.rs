use rand::seq::index;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Nearest centroid; ties go to the lower index.
    pub fn assign(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(x, c);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Mean squared distance to the assigned centroid.
    pub fn distortion(&self, ds: &Dataset) -> f64 {
        ds.rows()
            .iter()
            .map(|r| sq_dist(&r.x, &self.centroids[self.assign(&r.x)]))
            .sum::<f64>()
            / ds.len() as f64
    }
}

pub fn quantize_kmeans(ds: &Dataset, k: usize, iters: usize, seed: SeedSpec) -> Result<Codebook> {
    quantize_kmeans_traced(ds, k, iters, seed).map(|(c, _)| c)
}

/// Lloyd's algorithm for exactly `iters` rounds, seeded with `k` distinct
/// random rows. Also returns the distortion after initialization and after
/// every round. An empty cluster keeps its previous centroid.
pub fn quantize_kmeans_traced(ds: &Dataset, k: usize, iters: usize, seed: SeedSpec) -> Result<(Codebook, Vec<f64>)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > ds.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} must lie in [1, n = {}]",
            ds.len()
        )));
    }
    let d = ds.d();
    let mut rng = seed.stream("kmeans-init");
    let mut picks: Vec<usize> = index::sample(&mut rng, ds.len(), k).into_vec();
    picks.sort_unstable();
    let mut book = Codebook {
        centroids: picks.iter().map(|&i| ds.rows()[i].x.to_vec()).collect(),
    };
    let mut history = vec![book.distortion(ds)];
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for row in ds.rows() {
            let c = book.assign(&row.x);
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(row.x.iter()) {
                *s += v;
            }
        }
        for (c, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
            if count > 0 {
                book.centroids[c] = sum.into_iter().map(|s| s / count as f64).collect();
            }
        }
        history.push(book.distortion(ds));
    }
    Ok((book, history))
}
