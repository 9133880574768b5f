//! The obfuscation game over a finite public-data domain.
//!
//! A defender picks a row-stochastic mapping `f(x' | x)`; an attacker who
//! knows `f` and the joint `Pr(s, x)` answers each observed `x'` with the
//! attribute guess maximizing expected privacy loss. The defender's optimal
//! mapping under a utility-loss budget is a linear program, solved here
//! exactly for toy domain sizes.

pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use simplex::{Constraint, LinearProgram, Relation};

/// Largest public-data domain the LP will accept.
pub const MAX_DOMAIN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    n_s: usize,
    n_x: usize,
    /// Row-major `|S| x |X|`.
    table: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n_s = rows.len();
        let n_x = rows.first().map_or(0, Vec::len);
        if n_s == 0 || n_x == 0 || rows.iter().any(|r| r.len() != n_x) {
            return Err(Error::InvalidConfig("joint table must be a nonempty rectangle".into()));
        }
        let table: Vec<f64> = rows.concat();
        if table.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidDistribution("joint entries must be >= 0".into()));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("joint sums to {sum}")));
        }
        Ok(Self { n_s, n_x, table })
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn get(&self, s: usize, x: usize) -> f64 {
        self.table[s * self.n_x + x]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.n_x).map(|x| (0..self.n_s).map(|s| self.get(s, x)).sum()).collect()
    }

    pub fn marginal_s(&self) -> Vec<f64> {
        (0..self.n_s).map(|s| (0..self.n_x).map(|x| self.get(s, x)).sum()).collect()
    }
}

/// Row-stochastic `f(x' | x)`, row-major with `x` as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct ObfuscationMatrix {
    n: usize,
    f: Vec<f64>,
}

impl ObfuscationMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig("obfuscation matrix must be square".into()));
        }
        for (x, row) in rows.iter().enumerate() {
            if row.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidDistribution(format!("row {x} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDistribution(format!("row {x} sums to {sum}")));
            }
        }
        Ok(Self { n, f: rows.concat() })
    }

    pub fn identity(n: usize) -> Self {
        let mut f = vec![0.0; n * n];
        for i in 0..n {
            f[i * n + i] = 1.0;
        }
        Self { n, f }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            f: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, x_prime: usize) -> f64 {
        self.f[x * self.n + x_prime]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.f[x * self.n..(x + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.f.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

/// Privacy loss `d_p(s, s_hat)` and utility loss `d_q(x', x)` tables.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpecs {
    n_s: usize,
    n_x: usize,
    d_p: Vec<f64>,
    d_q: Vec<f64>,
}

impl LossSpecs {
    pub fn new(d_p: &[Vec<f64>], d_q: &[Vec<f64>]) -> Result<Self> {
        let n_s = d_p.len();
        let n_x = d_q.len();
        if d_p.iter().any(|r| r.len() != n_s) || d_q.iter().any(|r| r.len() != n_x) {
            return Err(Error::InvalidConfig("loss tables must be square".into()));
        }
        let d_p = d_p.concat();
        let d_q = d_q.concat();
        if d_p.iter().chain(&d_q).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidConfig("losses must be >= 0".into()));
        }
        if (0..n_x).any(|i| d_q[i * n_x + i] != 0.0) {
            return Err(Error::InvalidConfig("d_q(x, x) must be 0".into()));
        }
        Ok(Self { n_s, n_x, d_p, d_q })
    }

    /// 0-1 privacy loss (1 when the attacker guesses right) with the given
    /// utility-loss table.
    pub fn zero_one(n_s: usize, d_q: &[Vec<f64>]) -> Result<Self> {
        let d_p: Vec<Vec<f64>> = (0..n_s)
            .map(|s| (0..n_s).map(|t| f64::from(u8::from(s == t))).collect())
            .collect();
        Self::new(&d_p, d_q)
    }

    pub fn d_p(&self, s: usize, s_hat: usize) -> f64 {
        self.d_p[s * self.n_s + s_hat]
    }

    pub fn d_q(&self, x_prime: usize, x: usize) -> f64 {
        self.d_q[x_prime * self.n_x + x]
    }

    pub fn max_d_q(&self) -> f64 {
        self.d_q.iter().copied().fold(0.0, f64::max)
    }
}

fn check_shapes(f: Option<&ObfuscationMatrix>, joint: &JointDistribution, losses: &LossSpecs) -> Result<()> {
    if losses.n_s != joint.n_s {
        return Err(Error::DimensionMismatch {
            expected: joint.n_s,
            got: losses.n_s,
        });
    }
    if losses.n_x != joint.n_x {
        return Err(Error::DimensionMismatch {
            expected: joint.n_x,
            got: losses.n_x,
        });
    }
    if let Some(f) = f {
        if f.n != joint.n_x {
            return Err(Error::DimensionMismatch {
                expected: joint.n_x,
                got: f.n,
            });
        }
    }
    Ok(())
}

/// `L = sum_{x, x'} Pr(x) f(x'|x) d_q(x', x)`.
pub fn expected_utility_loss(f: &ObfuscationMatrix, joint: &JointDistribution, losses: &LossSpecs) -> Result<f64> {
    check_shapes(Some(f), joint, losses)?;
    let px = joint.marginal_x();
    let n = joint.n_x;
    Ok((0..n)
        .map(|x| px[x] * (0..n).map(|xp| f.get(x, xp) * losses.d_q(xp, x)).sum::<f64>())
        .sum())
}

/// Attacker's expected loss contribution `sum_s sum_x Pr(s,x) f(x'|x) d_p(s, s_hat)`.
fn guess_value(f: &ObfuscationMatrix, joint: &JointDistribution, losses: &LossSpecs, x_prime: usize, s_hat: usize) -> f64 {
    (0..joint.n_s)
        .map(|s| {
            losses.d_p(s, s_hat) * (0..joint.n_x).map(|x| joint.get(s, x) * f.get(x, x_prime)).sum::<f64>()
        })
        .sum()
}

/// Unconditional privacy loss against a best-responding attacker.
pub fn expected_privacy_loss(f: &ObfuscationMatrix, joint: &JointDistribution, losses: &LossSpecs) -> Result<f64> {
    check_shapes(Some(f), joint, losses)?;
    Ok((0..joint.n_x)
        .map(|xp| {
            (0..joint.n_s)
                .map(|s_hat| guess_value(f, joint, losses, xp, s_hat))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

/// Optimal obfuscation under `L <= beta`.
///
/// Variables are `f(x'|x)` (index `x * n + x'`) followed by one epigraph
/// variable `y_{x'}` per output.
pub fn solve_game_lp(joint: &JointDistribution, losses: &LossSpecs, beta: f64) -> Result<(ObfuscationMatrix, f64)> {
    check_shapes(None, joint, losses)?;
    let n = joint.n_x;
    if n > MAX_DOMAIN {
        return Err(Error::DomainTooLarge {
            size: n,
            limit: MAX_DOMAIN,
        });
    }
    if !(beta >= 0.0) {
        return Err(Error::Infeasible(format!("budget {beta} must be >= 0")));
    }
    let nv = n * n + n;
    let mut objective = vec![0.0; nv];
    objective[n * n..].iter_mut().for_each(|v| *v = 1.0);

    let mut constraints = Vec::with_capacity(1 + n * joint.n_s + n);
    let px = joint.marginal_x();
    let mut budget = vec![0.0; nv];
    for x in 0..n {
        for xp in 0..n {
            budget[x * n + xp] = px[x] * losses.d_q(xp, x);
        }
    }
    constraints.push(Constraint {
        coeffs: budget,
        relation: Relation::Le,
        rhs: beta,
    });
    for xp in 0..n {
        for s_hat in 0..joint.n_s {
            let mut row = vec![0.0; nv];
            for x in 0..n {
                row[x * n + xp] = (0..joint.n_s).map(|s| joint.get(s, x) * losses.d_p(s, s_hat)).sum();
            }
            row[n * n + xp] = -1.0;
            constraints.push(Constraint {
                coeffs: row,
                relation: Relation::Le,
                rhs: 0.0,
            });
        }
    }
    for x in 0..n {
        let mut row = vec![0.0; nv];
        row[x * n..(x + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        constraints.push(Constraint {
            coeffs: row,
            relation: Relation::Eq,
            rhs: 1.0,
        });
    }
    let solution = simplex::solve(&LinearProgram {
        objective,
        constraints,
    })?;

    // Clean round-off so rows are exactly stochastic.
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let mut row: Vec<f64> = solution.x[x * n..(x + 1) * n].iter().map(|v| v.max(0.0)).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            row
        })
        .collect();
    let f = ObfuscationMatrix::new(&rows)?;
    Ok((f, solution.objective))
}

/// Exhaustive search over 2 x 2 row-stochastic mappings on a grid of step
/// `step`: row 0 is `(1 - a, a)`, row 1 is `(b, 1 - b)`.
pub fn brute_force_game(
    joint: &JointDistribution,
    losses: &LossSpecs,
    beta: f64,
    step: f64,
) -> Result<(ObfuscationMatrix, f64)> {
    check_shapes(None, joint, losses)?;
    if joint.n_x != 2 {
        return Err(Error::InvalidConfig("brute force oracle needs |X| = 2".into()));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidConfig("step must lie in (0, 1]".into()));
    }
    let ticks = (1.0 / step).round() as usize;
    let mut best: Option<(ObfuscationMatrix, f64)> = None;
    for i in 0..=ticks {
        let a = i as f64 / ticks as f64;
        for j in 0..=ticks {
            let b = j as f64 / ticks as f64;
            let f = ObfuscationMatrix::new(&[vec![1.0 - a, a], vec![b, 1.0 - b]])?;
            if expected_utility_loss(&f, joint, losses)? > beta + 1e-12 {
                continue;
            }
            let obj = expected_privacy_loss(&f, joint, losses)?;
            if best.as_ref().is_none_or(|(_, o)| obj < *o - 1e-15) {
                best = Some((f, obj));
            }
        }
    }
    best.ok_or_else(|| Error::Infeasible("no grid point satisfies the budget".into()))
}

/// On-disk game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct GameInstance {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "X")]
    pub x: usize,
    /// `|S| x |X|` table of `Pr(s, x)`.
    pub joint: Vec<Vec<f64>>,
    pub d_p: Vec<Vec<f64>>,
    pub d_q: Vec<Vec<f64>>,
    pub beta: f64,
}

impl GameInstance {
    pub fn parts(&self) -> Result<(JointDistribution, LossSpecs)> {
        let joint = JointDistribution::new(&self.joint)?;
        if joint.n_s() != self.s || joint.n_x() != self.x {
            return Err(Error::InvalidConfig(format!(
                "joint table is {}x{}, header says {}x{}",
                joint.n_s(),
                joint.n_x(),
                self.s,
                self.x
            )));
        }
        Ok((joint, LossSpecs::new(&self.d_p, &self.d_q)?))
    }
}

/// Solution CSV: one row per true value `x` with `f(x'|x)` columns, then an
/// `objective` row.
pub fn write_solution_csv<W: std::io::Write>(w: W, f: &ObfuscationMatrix, objective: f64) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let mut header = vec!["x".to_string()];
    header.extend((1..=f.n()).map(|j| format!("f_{j}")));
    out.write_record(&header)?;
    for x in 0..f.n() {
        let mut rec = vec![(x + 1).to_string()];
        rec.extend(f.row(x).iter().map(|v| format!("{v:.6}")));
        out.write_record(&rec)?;
    }
    out.write_record(["objective".to_string(), format!("{objective:.6}")])?;
    out.flush()?;
    Ok(())
}
