//! Dense two-phase tableau simplex; Bland's rule guards against cycling.
//!
//! Meant for the toy-sized programs of the obfuscation game; no sparsity,
//! no presolve.

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;
/// Smallest usable pivot element.
const PIVOT_TOL: f64 = 1e-9;
/// Tableau entries below this after a pivot are round-off.
const DRIFT: f64 = 1e-13;
/// Allowed constraint violation of the returned point.
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c.x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `rows x (cols + 1)`; the last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[row].clone();
        for (r, line) in self.a.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor == 0.0 {
                continue;
            }
            for (v, pv) in line.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
                if v.abs() < DRIFT {
                    *v = 0.0;
                }
            }
            line[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reduced costs of `cost` against the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb == 0.0 {
                continue;
            }
            for (j, v) in rc.iter_mut().enumerate() {
                *v -= cb * self.a[r][j];
            }
        }
        rc
    }

    /// Minimize `cost` over columns `< allowed`. Dantzig pricing with the
    /// largest pivot among ratio ties; after a run of degenerate pivots it
    /// switches to Bland's rule, which cannot cycle.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        let mut degenerate_run = 0usize;
        let bland_after = 2 * self.a.len() + 10;
        loop {
            let bland = degenerate_run > bland_after;
            let rc = self.reduced_costs(cost);
            let enter = if bland {
                (0..allowed).find(|&j| rc[j] < -EPS)
            } else {
                (0..allowed)
                    .filter(|&j| rc[j] < -EPS)
                    .min_by(|&i, &j| rc[i].total_cmp(&rc[j]))
            };
            let Some(enter) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.a.len() {
                let coef = self.a[r][enter];
                if coef <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.a[r][self.cols].max(0.0) / coef;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, best)) => {
                        let tie = ratio <= best + EPS;
                        let better_tie = if bland {
                            self.basis[r] < self.basis[lr]
                        } else {
                            coef > self.a[lr][enter]
                        };
                        if ratio < best - EPS || (tie && better_tie) {
                            leave = Some((r, ratio.min(best)));
                        }
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= EPS {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, enter);
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.objective.len();
    let rows = lp.constraints.len();
    for c in &lp.constraints {
        if c.coeffs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.coeffs.len(),
            });
        }
    }
    // Normalize to nonnegative right-hand sides.
    let normalized: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();
    let n_slack = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
    let n_art = normalized.iter().filter(|c| c.1 != Relation::Le).count();
    let art_start = n + n_slack;
    let cols = art_start + n_art;

    let mut a = vec![vec![0.0; cols + 1]; rows];
    let mut basis = vec![0; rows];
    let (mut slack, mut art) = (n, art_start);
    for (r, (coeffs, rel, rhs)) in normalized.iter().enumerate() {
        a[r][..n].copy_from_slice(coeffs);
        a[r][cols] = *rhs;
        match rel {
            Relation::Le => {
                a[r][slack] = 1.0;
                basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                a[r][slack] = -1.0;
                slack += 1;
                a[r][art] = 1.0;
                basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                a[r][art] = 1.0;
                basis[r] = art;
                art += 1;
            }
        }
    }
    let mut t = Tableau {
        a,
        basis,
        cols,
        pivots: 0,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|v| *v = 1.0);
        t.optimize(&phase1, cols)?;
        let infeas: f64 = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(r, _)| t.a[r][cols])
            .sum();
        if infeas > 1e-8 {
            return Err(Error::Infeasible("linear program has no feasible point".into()));
        }
        // Pivot degenerate artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < t.a.len() {
            if t.basis[r] >= art_start {
                if let Some(col) = (0..art_start).find(|&j| t.a[r][j].abs() > PIVOT_TOL) {
                    t.pivot(r, col);
                } else {
                    t.a.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&lp.objective);
    t.optimize(&phase2, art_start)?;

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.a[r][cols];
        }
    }
    for c in &lp.constraints {
        let lhs: f64 = c.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        let scale = 1.0 + c.rhs.abs();
        let violated = match c.relation {
            Relation::Le => lhs - c.rhs > FEAS_TOL * scale,
            Relation::Ge => c.rhs - lhs > FEAS_TOL * scale,
            Relation::Eq => (lhs - c.rhs).abs() > FEAS_TOL * scale,
        };
        if violated {
            return Err(Error::Infeasible("simplex lost feasibility to round-off".into()));
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        x,
        objective,
        pivots: t.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(coeffs: &[f64], relation: Relation, rhs: f64) -> Constraint {
        Constraint { coeffs: coeffs.to_vec(), relation, rhs }
    }

    #[test]
    fn textbook_max_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            constraints: vec![
                c(&[1.0, 0.0], Relation::Le, 4.0),
                c(&[0.0, 2.0], Relation::Le, 12.0),
                c(&[3.0, 2.0], Relation::Le, 18.0),
            ],
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y s.t. x + y = 3, x >= 1, y >= 0.5 -> (2.5, 0.5), 3.5
        let lp = LinearProgram {
            objective: vec![1.0, 2.0],
            constraints: vec![
                c(&[1.0, 1.0], Relation::Eq, 3.0),
                c(&[1.0, 0.0], Relation::Ge, 1.0),
                c(&[0.0, 1.0], Relation::Ge, 0.5),
            ],
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective - 3.5).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_is_flipped() {
        // -x <= -2  <=>  x >= 2
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![c(&[-1.0], Relation::Le, -2.0)],
        };
        assert!((solve(&lp).unwrap().objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![c(&[1.0], Relation::Le, 1.0), c(&[1.0], Relation::Ge, 2.0)],
        };
        assert!(matches!(solve(&lp), Err(Error::Infeasible(_))));
        let lp = LinearProgram {
            objective: vec![-1.0],
            constraints: vec![c(&[1.0], Relation::Ge, 1.0)],
        };
        assert!(matches!(solve(&lp), Err(Error::Unbounded)));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            constraints: vec![
                c(&[1.0, 1.0], Relation::Eq, 1.0),
                c(&[2.0, 2.0], Relation::Eq, 2.0),
            ],
        };
        assert!((solve(&lp).unwrap().objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let lp = LinearProgram {
            objective: vec![-0.75, 150.0, -0.02, 6.0],
            constraints: vec![
                c(&[0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0),
                c(&[0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0),
                c(&[0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0),
            ],
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }
}
