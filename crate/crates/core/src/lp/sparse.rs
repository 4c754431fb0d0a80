//! Revised sparse simplex backend provided by the `minilp` crate.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use super::program::{LinearProgram, PrimalSolution, Sense};
use super::{LpError, LpSolver};

#[derive(Clone, Copy, Debug, Default)]
pub struct SparseSimplex;

impl LpSolver for SparseSimplex {
    fn name(&self) -> &'static str {
        "sparse-minilp"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<PrimalSolution, LpError> {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = lp
            .objective
            .iter()
            .map(|&c| problem.add_var(c, (0.0, f64::INFINITY)))
            .collect();
        for c in lp.constraints.iter().filter(|c| !c.is_vacuous()) {
            let mut expr = LinearExpr::empty();
            for &(col, a) in &c.coeffs {
                expr.add(vars[col], a);
            }
            let op = match c.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(expr, op, c.rhs);
        }
        let solution = problem.solve().map_err(|e| match e {
            minilp::Error::Infeasible => LpError::Infeasible,
            minilp::Error::Unbounded => LpError::Unbounded,
        })?;
        let x: Vec<f64> = vars.iter().map(|&v| solution[v]).collect();
        Ok(PrimalSolution { objective: lp.objective_value(&x), x, duals: None })
    }
}
