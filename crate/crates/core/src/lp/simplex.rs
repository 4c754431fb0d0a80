//! Dense two-phase tableau simplex.
//!
//! Dantzig pricing with largest-pivot ties; after a run of degenerate pivots it
//! switches to Bland's rule until the objective moves again.
//!
//! Intended for small models; the tableau is `(rows + 1) x (columns + slacks + artificials + 1)`.

use super::program::{LinearProgram, PrimalSolution, Sense};
use super::{LpError, LpSolver};

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
/// Degenerate pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

#[derive(Clone, Debug)]
pub struct DenseSimplex {
    pub max_iterations: usize,
    /// Phase-one objective above this value means infeasible.
    pub feasibility_tol: f64,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex { max_iterations: 1_000_000, feasibility_tol: 1e-7 }
    }
}

impl DenseSimplex {
    /// Number of tableau cells the model would need.
    pub fn tableau_size(lp: &LinearProgram) -> usize {
        let rows: Vec<_> = lp.constraints.iter().filter(|c| !c.is_vacuous()).collect();
        let extra: usize = rows
            .iter()
            .map(|c| match c.sense {
                Sense::Eq => 1,
                _ => 2,
            })
            .sum();
        (rows.len() + 1) * (lp.num_columns() + extra + 1)
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    /// basic column of each constraint row
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    /// Row `rows` holds reduced costs; its last entry is minus the objective.
    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.row(pr).to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.width;
        let obj = self.rows * w;
        self.data[obj..obj + w].iter_mut().for_each(|v| *v = 0.0);
        self.data[obj..obj + costs.len()].copy_from_slice(costs);
        for r in 0..self.rows {
            let cb = costs.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for c in 0..w {
                    self.data[obj + c] -= cb * self.data[r * w + c];
                }
            }
        }
    }

    /// Optimizes over entering columns `< allowed`. Returns the iteration count used.
    fn optimize(&mut self, allowed: usize, budget: usize) -> Result<usize, LpError> {
        let rhs = self.width - 1;
        let mut stall = 0;
        for it in 0..budget {
            let bland = stall >= STALL_LIMIT;
            let obj = self.row(self.rows);
            let enter = if bland {
                (0..allowed).find(|&c| obj[c] < -COST_EPS)
            } else {
                (0..allowed).filter(|&c| obj[c] < -COST_EPS).min_by(|&a, &b| obj[a].total_cmp(&obj[b]))
            };
            let Some(enter) = enter else {
                return Ok(it);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.at(r, rhs).max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((br, bv)) => {
                        let tie = 1e-12 * bv.abs().max(1.0);
                        if ratio < bv - tie {
                            true
                        } else if ratio <= bv + tie {
                            if bland {
                                self.basis[r] < self.basis[br]
                            } else {
                                a > self.at(br, enter)
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((pr, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            stall = if ratio * obj[enter].abs() > COST_EPS { 0 } else { stall + 1 };
            self.pivot(pr, enter);
        }
        Err(LpError::IterationLimit(budget))
    }
}

impl LpSolver for DenseSimplex {
    fn name(&self) -> &'static str {
        "dense-tableau"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<PrimalSolution, LpError> {
        let n = lp.num_columns();
        let kept: Vec<usize> = (0..lp.constraints.len()).filter(|&r| !lp.constraints[r].is_vacuous()).collect();
        let m = kept.len();

        // normalise rhs >= 0
        let mut flipped = vec![false; m];
        let mut senses = Vec::with_capacity(m);
        for (r, &orig) in kept.iter().enumerate() {
            let c = &lp.constraints[orig];
            if c.rhs < 0.0 {
                flipped[r] = true;
                senses.push(match c.sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                });
            } else {
                senses.push(c.sense);
            }
        }
        let slack_count = senses.iter().filter(|s| **s != Sense::Eq).count();
        let art_count = senses.iter().filter(|s| **s != Sense::Le).count();
        let slack0 = n;
        let art0 = n + slack_count;
        let width = n + slack_count + art_count + 1;
        let mut t = Tableau { rows: m, width, data: vec![0.0; (m + 1) * width], basis: vec![0; m] };

        // column of the identity block owning each row, used for duals
        let mut identity_col = vec![0usize; m];
        let (mut next_slack, mut next_art) = (slack0, art0);
        for (r, &orig) in kept.iter().enumerate() {
            let c = &lp.constraints[orig];
            let sign = if flipped[r] { -1.0 } else { 1.0 };
            for &(col, a) in &c.coeffs {
                t.data[r * width + col] += sign * a;
            }
            t.data[r * width + width - 1] = sign * c.rhs;
            match senses[r] {
                Sense::Le => {
                    t.data[r * width + next_slack] = 1.0;
                    t.basis[r] = next_slack;
                    identity_col[r] = next_slack;
                    next_slack += 1;
                }
                Sense::Ge => {
                    t.data[r * width + next_slack] = -1.0;
                    next_slack += 1;
                    t.data[r * width + next_art] = 1.0;
                    t.basis[r] = next_art;
                    identity_col[r] = next_art;
                    next_art += 1;
                }
                Sense::Eq => {
                    t.data[r * width + next_art] = 1.0;
                    t.basis[r] = next_art;
                    identity_col[r] = next_art;
                    next_art += 1;
                }
            }
        }

        let mut used = 0;
        if art_count > 0 {
            let mut phase1 = vec![0.0; width - 1];
            phase1[art0..art0 + art_count].iter_mut().for_each(|v| *v = 1.0);
            t.set_costs(&phase1);
            used += t.optimize(width - 1, self.max_iterations)?;
            let infeasibility = -t.at(m, width - 1);
            if infeasibility > self.feasibility_tol {
                return Err(LpError::Infeasible);
            }
            // pivot remaining artificials out of the basis where possible
            for r in 0..m {
                if t.basis[r] >= art0 {
                    let best = (0..art0).max_by(|&a, &b| t.at(r, a).abs().total_cmp(&t.at(r, b).abs()));
                    if let Some(c) = best.filter(|&c| t.at(r, c).abs() > 1e-7) {
                        t.pivot(r, c);
                    }
                }
            }
        }

        let mut costs = vec![0.0; width - 1];
        costs[..n].copy_from_slice(&lp.objective);
        t.set_costs(&costs);
        used += t.optimize(art0, self.max_iterations.saturating_sub(used))?;
        log::debug!("dense simplex finished after {} pivots", used);

        let mut x = vec![0.0; n];
        for r in 0..m {
            let b = t.basis[r];
            if b < n {
                x[b] = t.at(r, width - 1);
            }
        }
        // reduced cost of an identity column is (cost 0) - pi_r
        let mut duals = vec![0.0; lp.constraints.len()];
        for (r, &orig) in kept.iter().enumerate() {
            let pi = -t.at(m, identity_col[r]);
            duals[orig] = if flipped[r] { -pi } else { pi };
        }
        let objective = lp.objective_value(&x);
        Ok(PrimalSolution { x, objective, duals: Some(duals) })
    }
}

#[cfg(test)]
mod tests {
    use super::super::program::Constraint;
    use super::*;

    fn row(coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> Constraint {
        Constraint { coeffs: coeffs.to_vec(), sense, rhs }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            constraints: vec![
                row(&[(0, 1.0)], Sense::Le, 4.0),
                row(&[(1, 2.0)], Sense::Le, 12.0),
                row(&[(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
            ],
        };
        let s = DenseSimplex::default().solve(&lp).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        let duals = s.duals.unwrap();
        let dual_obj: f64 = duals.iter().zip(&lp.constraints).map(|(p, c)| p * c.rhs).sum();
        assert!((dual_obj - s.objective).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y s.t. x + y = 2, x >= 0.5, -x <= -0.5 (negative rhs gets flipped)
        let lp = LinearProgram {
            objective: vec![1.0, 2.0],
            constraints: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 2.0),
                row(&[(1, 1.0)], Sense::Ge, 0.5),
                row(&[(0, -1.0)], Sense::Le, -0.5),
            ],
        };
        let s = DenseSimplex::default().solve(&lp).unwrap();
        assert!((s.objective - 2.5).abs() < 1e-9);
        let duals = s.duals.unwrap();
        let dual_obj: f64 = duals.iter().zip(&lp.constraints).map(|(p, c)| p * c.rhs).sum();
        assert!((dual_obj - 2.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let infeasible = LinearProgram {
            objective: vec![1.0],
            constraints: vec![row(&[(0, 1.0)], Sense::Ge, 2.0), row(&[(0, 1.0)], Sense::Le, 1.0)],
        };
        assert_eq!(DenseSimplex::default().solve(&infeasible), Err(LpError::Infeasible));
        let unbounded = LinearProgram { objective: vec![-1.0], constraints: vec![row(&[(0, 1.0)], Sense::Ge, 1.0)] };
        assert_eq!(DenseSimplex::default().solve(&unbounded), Err(LpError::Unbounded));
    }

    #[test]
    fn degenerate_redundant_equalities() {
        // duplicate equality leaves an artificial basic at zero
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            constraints: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 1.0),
                row(&[(0, 2.0), (1, 2.0)], Sense::Eq, 2.0),
                row(&[], Sense::Le, 1.0),
            ],
        };
        let s = DenseSimplex::default().solve(&lp).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!(lp.max_violation(&s.x) < 1e-9);
    }

    #[test]
    fn iteration_limit() {
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            constraints: vec![row(&[(0, 1.0), (1, 2.0)], Sense::Le, 4.0), row(&[(0, 3.0), (1, 1.0)], Sense::Le, 6.0)],
        };
        let solver = DenseSimplex { max_iterations: 1, ..Default::default() };
        assert!(matches!(solver.solve(&lp), Err(LpError::IterationLimit(_))));
    }
}
