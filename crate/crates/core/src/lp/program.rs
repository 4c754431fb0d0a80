use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `sum coeffs · x  (sense)  rhs`
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// A row with no coefficients that every `x` satisfies.
    pub fn is_vacuous(&self) -> bool {
        self.coeffs.is_empty()
            && match self.sense {
                Sense::Le => self.rhs >= 0.0,
                Sense::Ge => self.rhs <= 0.0,
                Sense::Eq => self.rhs == 0.0,
            }
    }
}

/// `min objective · x` subject to `constraints`, `x >= 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn num_columns(&self) -> usize {
        self.objective.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        self.constraints.iter().map(|c| c.violation(x)).fold(bounds, f64::max)
    }
}

/// Primal result of a solver run.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals when the backend provides them, indexed like the constraints.
    pub duals: Option<Vec<f64>>,
}
