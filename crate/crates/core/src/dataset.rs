//! Users, their public vectors and labels; JSON-lines IO; fold splitting
//! and the synthetic generator.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Label, PublicVector, RatingGrid};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct UserRow {
    pub user_id: String,
    pub x: PublicVector,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    m: usize,
    grid: RatingGrid,
    rows: Vec<UserRow>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    d: usize,
    m: usize,
    grid: RatingGrid,
}

#[derive(Serialize, Deserialize)]
struct Record {
    user_id: String,
    entries: Vec<(usize, f64)>,
    label: Option<usize>,
}

impl Dataset {
    pub fn new(d: usize, m: usize, grid: RatingGrid, rows: Vec<UserRow>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("d must be >= 1".into()));
        }
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if row.x.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.x.dim(),
                });
            }
            if let Some(label) = row.label {
                if label >= m {
                    return Err(Error::LabelOutOfRange { label, m });
                }
            }
            if !seen.insert(row.user_id.as_str()) {
                return Err(Error::DuplicateUser(row.user_id.clone()));
            }
        }
        Ok(Self { d, m, grid, rows })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &RatingGrid {
        &self.grid
    }

    pub fn rows(&self) -> &[UserRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All labels, failing on the first unlabeled row.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.rows
            .iter()
            .map(|r| r.label.ok_or_else(|| Error::MissingLabel(r.user_id.clone())))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            d: self.d,
            m: self.m,
            grid: self.grid.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Same users and labels with replaced public vectors.
    pub fn with_vectors(&self, xs: Vec<PublicVector>) -> Result<Dataset> {
        if xs.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                got: xs.len(),
            });
        }
        let rows = self
            .rows
            .iter()
            .zip(xs)
            .map(|(r, x)| UserRow {
                user_id: r.user_id.clone(),
                x,
                label: r.label,
            })
            .collect();
        Dataset::new(self.d, self.m, self.grid.clone(), rows)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            d: self.d,
            m: self.m,
            grid: self.grid.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for row in &self.rows {
            let record = Record {
                user_id: row.user_id.clone(),
                entries: row
                    .x
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| (k, *v))
                    .collect(),
                label: row.label,
            };
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line".into()))??;
        let header: Header = serde_json::from_str(&header_line)?;
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line)?;
            let mut x = vec![0.0; header.d];
            for (k, v) in record.entries {
                if k >= header.d {
                    return Err(Error::Parse(format!(
                        "line {}: entry index {k} >= d = {}",
                        lineno + 2,
                        header.d
                    )));
                }
                x[k] = v;
            }
            rows.push(UserRow {
                user_id: record.user_id,
                x: PublicVector::new(x, &header.grid)?,
                label: record.label,
            });
        }
        Dataset::new(header.d, header.m, header.grid, rows)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Two folds of `floor(n/2)` rows each sharing
/// `round(alpha_pct / 100 * floor(n/2))` rows.
pub fn split_overlap(ds: &Dataset, alpha_pct: f64, seed: SeedSpec) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidConfig("overlap split needs at least 2 rows".into()));
    }
    if !(0.0..=100.0).contains(&alpha_pct) {
        return Err(Error::InvalidConfig(format!("alpha {alpha_pct} outside [0, 100]")));
    }
    let half = n / 2;
    let shared = (alpha_pct / 100.0 * half as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.stream("split-overlap"));
    let a = order[..half].to_vec();
    let b: Vec<usize> = order[..shared]
        .iter()
        .chain(&order[half..half + (half - shared)])
        .copied()
        .collect();
    Ok((ds.subset(&a), ds.subset(&b)))
}

/// Seeded train/test partition; the test side gets `round(n * test_fraction)` rows.
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: SeedSpec) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidConfig(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let n = ds.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.stream("train-test"));
    let (test, train) = order.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    /// Mean number of nonzero entries per user.
    pub sparsity: f64,
    /// Fraction of each user's nonzeros placed in its label's block.
    pub signal: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            d: 100,
            m: 5,
            n: 3000,
            sparsity: 10.0,
            signal: 0.8,
        }
    }
}

/// Synthetic ratings with label-dependent structure.
///
/// Items are cut into `m` contiguous blocks of `d / m` items; block `s`
/// holds the signal items of label `s` (trailing items belong to no block).
/// A user draws its nonzero count uniformly from
/// `[ceil(sparsity / 2), floor(3 * sparsity / 2)]`, sends each nonzero to its
/// own block with probability `signal` and places the rest uniformly among all
/// remaining items. Values are uniform over the nonzero grid levels.
pub fn synth_generate(cfg: &SynthConfig, grid: &RatingGrid, seed: SeedSpec) -> Result<Dataset> {
    let SynthConfig {
        d,
        m,
        n,
        sparsity,
        signal,
    } = *cfg;
    if m < 2 || d < m || n < 1 {
        return Err(Error::InvalidConfig(format!(
            "synthetic data needs d >= m >= 2 and n >= 1 (d={d}, m={m}, n={n})"
        )));
    }
    if !(sparsity >= 1.0) || sparsity > d as f64 {
        return Err(Error::Infeasible(format!(
            "sparsity {sparsity} must lie in [1, d = {d}]"
        )));
    }
    if !(0.0..=1.0).contains(&signal) {
        return Err(Error::InvalidConfig(format!("signal {signal} outside [0, 1]")));
    }
    let block = d / m;
    let lo_k = ((sparsity / 2.0).ceil() as usize).max(1);
    let hi_k = ((sparsity * 1.5).floor() as usize).clamp(lo_k, d);
    let levels = grid.nonzero_levels();

    let mut rows = Vec::with_capacity(n);
    for u in 0..n {
        let user_id = format!("u{u:05}");
        let mut rng = seed.user_stream("synth", &user_id);
        let label = rng.random_range(0..m);
        let k = rng.random_range(lo_k..=hi_k);
        let in_block = (0..k).filter(|_| rng.random_bool(signal)).count().min(block);

        let mut chosen = vec![false; d];
        for i in index::sample(&mut rng, block, in_block).iter() {
            chosen[label * block + i] = true;
        }
        let free: Vec<usize> = (0..d).filter(|&j| !chosen[j]).collect();
        for i in index::sample(&mut rng, free.len(), k - in_block).iter() {
            chosen[free[i]] = true;
        }
        let x: Vec<f64> = chosen
            .iter()
            .map(|&c| if c { levels[rng.random_range(0..levels.len())] } else { 0.0 })
            .collect();
        rows.push(UserRow {
            user_id,
            x: PublicVector::new(x, grid)?,
            label: Some(label),
        });
    }
    Dataset::new(d, m, grid.clone(), rows)
}

/// The item range holding label `s`'s signal items.
pub fn signal_block(d: usize, m: usize, s: Label) -> std::ops::Range<usize> {
    let block = d / m;
    s * block..(s + 1) * block
}
