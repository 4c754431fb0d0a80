//! Time-indexed and interval-indexed LP relaxations of the makespan problem.
//!
//! For every flow `f`, core `p` and time index `t` (or interval `l`) there is a
//! column `y[f,p,t]`: the time `f` spends on core `p` during that index, scaled
//! by the interval length in interval mode. One extra column holds `C_max`.
//! Rows, in order:
//!
//! * coverage: `sum_{p,t} s_p w_t y / d_f = 1` per flow
//! * input and output capacity: `sum_{f at port} y <= 1` per (port, core, index)
//! * completion: `C_max >= C_f`, with `C_f = sum_{p,t} (s_p g_t / d_f + 1/2) w_t y`
//! * duration: `C_max >= sum_{p,t} w_t y`
//!
//! where `w_t = 1`, `g_t = t + 1/2` in time mode and `w_l = |I_l|`,
//! `g_l = (1+eta)^(l-1)` (1/2 for `l = 0`) in interval mode.

mod program;
mod simplex;
mod sparse;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

pub use program::{Constraint, LinearProgram, PrimalSolution, Sense};
pub use simplex::DenseSimplex;
pub use sparse::SparseSimplex;

use crate::model::{interval_grid, time_horizon, CoflowInstance, Flow, FlowId, IntervalGrid};

/// Default cap on the number of `y` columns a builder will emit.
pub const DEFAULT_MAX_COLUMNS: usize = 2_000_000;
/// Default feasibility tolerance for returned solutions.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Values at or below this are dropped from the sparse solution.
const ZERO_CUTOFF: f64 = 1e-12;
/// Models whose dense tableau stays under this many cells use the built-in simplex.
pub const DENSE_TABLEAU_LIMIT: usize = 250_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("model needs {columns} y-columns, above the cap of {cap}")]
    TooLarge { columns: usize, cap: usize },
    #[error("instance has no flows")]
    NoFlows,
    #[error("LP is infeasible")]
    Infeasible,
    #[error("LP is unbounded")]
    Unbounded,
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("solution violates constraints by {0:e}")]
    Tolerance(f64),
    #[error("flow {0} is not part of the solution")]
    UnknownFlow(FlowId),
    #[error("{0}")]
    Model(String),
}

impl From<crate::model::ModelError> for LpError {
    fn from(e: crate::model::ModelError) -> Self {
        LpError::Model(e.to_string())
    }
}

/// A backend able to solve [`LinearProgram`]s.
pub trait LpSolver {
    fn name(&self) -> &'static str;
    fn solve(&self, lp: &LinearProgram) -> Result<PrimalSolution, LpError>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum SolverChoice {
    /// Dense simplex for small models, sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LpMode {
    TimeIndexed,
    IntervalIndexed(IntervalGrid),
}

impl LpMode {
    pub fn is_interval(&self) -> bool {
        matches!(self, LpMode::IntervalIndexed(_))
    }

    pub fn grid(&self) -> Option<&IntervalGrid> {
        match self {
            LpMode::TimeIndexed => None,
            LpMode::IntervalIndexed(g) => Some(g),
        }
    }
}

/// Per-index constants shared by the LP and the rounding algorithms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeAxis {
    /// `w`: 1 per time index, or the interval length.
    pub weights: Vec<f64>,
    /// `g`: `t + 1/2`, or `(1+eta)^(l-1)` with 1/2 at `l = 0`.
    pub growth: Vec<f64>,
    /// Priority key `t_ijk` of a flow committed to this index.
    pub priority: Vec<f64>,
}

impl TimeAxis {
    pub fn for_mode(mode: &LpMode, horizon: usize) -> Self {
        match mode {
            LpMode::TimeIndexed => {
                let k = horizon + 1;
                TimeAxis {
                    weights: vec![1.0; k],
                    growth: (0..k).map(|t| t as f64 + 0.5).collect(),
                    priority: (0..k).map(|t| t as f64).collect(),
                }
            }
            LpMode::IntervalIndexed(grid) => {
                let k = grid.num_intervals();
                TimeAxis {
                    weights: grid.lengths.clone(),
                    growth: (0..k).map(|l| grid.growth(l)).collect(),
                    priority: (0..k).map(|l| grid.left_endpoint(l)).collect(),
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Coverage,
    InputCapacity,
    OutputCapacity,
    Completion,
    Duration,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub max_columns: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_columns: DEFAULT_MAX_COLUMNS }
    }
}

/// An LP relaxation together with the index maps needed to read it back.
#[derive(Clone, Debug)]
pub struct LpModel {
    pub mode: LpMode,
    pub axis: TimeAxis,
    pub flows: Vec<Flow>,
    pub speeds: Vec<f64>,
    pub num_ports: usize,
    pub program: LinearProgram,
    pub row_kinds: Vec<RowKind>,
}

impl LpModel {
    pub fn num_cores(&self) -> usize {
        self.speeds.len()
    }

    pub fn num_y_columns(&self) -> usize {
        self.flows.len() * self.num_cores() * self.axis.len()
    }

    pub fn num_columns(&self) -> usize {
        self.program.num_columns()
    }

    pub fn num_rows(&self) -> usize {
        self.program.constraints.len()
    }

    pub fn rows_of(&self, kind: RowKind) -> usize {
        self.row_kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn y_column(&self, flow: usize, core: usize, index: usize) -> usize {
        (flow * self.num_cores() + core) * self.axis.len() + index
    }

    pub fn c_max_column(&self) -> usize {
        self.num_y_columns()
    }

    fn column_name(&self, col: usize) -> String {
        if col == self.c_max_column() {
            return "Cmax".to_string();
        }
        let k = self.axis.len();
        let index = col % k;
        let core = (col / k) % self.num_cores();
        let id = self.flows[col / k / self.num_cores()].id;
        format!("y_{}_{}_{}_{}_{}", id.input + 1, id.output + 1, id.coflow + 1, core + 1, index)
    }

    /// Plain-text listing in an LP-file-like syntax.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "Minimize\n obj: Cmax\nSubject To").unwrap();
        for (r, (c, kind)) in self.program.constraints.iter().zip(&self.row_kinds).enumerate() {
            let mut line = format!(" r{}_{:?}:", r, kind);
            if c.coeffs.is_empty() {
                line.push_str(" 0");
            }
            for &(col, a) in &c.coeffs {
                let sign = if a < 0.0 { '-' } else { '+' };
                write!(line, " {} {} {}", sign, a.abs(), self.column_name(col)).unwrap();
            }
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(out, "{} {} {}", line, op, c.rhs).unwrap();
        }
        writeln!(out, "End").unwrap();
        out
    }
}

/// Builds the time-indexed relaxation over `t = 0..=T`.
pub fn build_time_indexed(instance: &CoflowInstance, options: BuildOptions) -> Result<LpModel, LpError> {
    let horizon = time_horizon(instance);
    build(instance.flows(), instance.speeds(), instance.num_ports(), LpMode::TimeIndexed, horizon, options)
}

/// Builds the interval-indexed relaxation on the grid for `eta`.
pub fn build_interval_indexed(
    instance: &CoflowInstance,
    eta: f64,
    options: BuildOptions,
) -> Result<LpModel, LpError> {
    let horizon = time_horizon(instance);
    let grid = interval_grid(eta, horizon)?;
    build(
        instance.flows(),
        instance.speeds(),
        instance.num_ports(),
        LpMode::IntervalIndexed(grid),
        horizon,
        options,
    )
}

fn build(
    flows: &[Flow],
    speeds: &[f64],
    num_ports: usize,
    mode: LpMode,
    horizon: usize,
    options: BuildOptions,
) -> Result<LpModel, LpError> {
    if flows.is_empty() {
        return Err(LpError::NoFlows);
    }
    let axis = TimeAxis::for_mode(&mode, horizon);
    let m = speeds.len();
    let k = axis.len();
    let y_cols = flows.len() * m * k;
    if y_cols > options.max_columns {
        return Err(LpError::TooLarge { columns: y_cols, cap: options.max_columns });
    }
    let mut model = LpModel {
        mode,
        axis,
        flows: flows.to_vec(),
        speeds: speeds.to_vec(),
        num_ports,
        program: LinearProgram { objective: vec![0.0; y_cols + 1], constraints: Vec::new() },
        row_kinds: Vec::new(),
    };
    let c_max = model.c_max_column();
    model.program.objective[c_max] = 1.0;
    let mut rows = Vec::new();

    for (f, flow) in flows.iter().enumerate() {
        let d = flow.demand as f64;
        let mut coeffs = Vec::with_capacity(m * k);
        for (p, &s) in speeds.iter().enumerate() {
            for t in 0..k {
                coeffs.push((model.y_column(f, p, t), s * model.axis.weights[t] / d));
            }
        }
        rows.push((RowKind::Coverage, Constraint { coeffs, sense: Sense::Eq, rhs: 1.0 }));
    }
    for (kind, port_of) in [
        (RowKind::InputCapacity, (|id: &FlowId| id.input) as fn(&FlowId) -> usize),
        (RowKind::OutputCapacity, |id: &FlowId| id.output),
    ] {
        for port in 0..num_ports {
            let at_port: Vec<usize> = (0..flows.len()).filter(|&f| port_of(&flows[f].id) == port).collect();
            for p in 0..m {
                for t in 0..k {
                    let coeffs = at_port.iter().map(|&f| (model.y_column(f, p, t), 1.0)).collect();
                    rows.push((kind, Constraint { coeffs, sense: Sense::Le, rhs: 1.0 }));
                }
            }
        }
    }
    for (f, flow) in flows.iter().enumerate() {
        let d = flow.demand as f64;
        let mut coeffs = vec![(c_max, 1.0)];
        for (p, &s) in speeds.iter().enumerate() {
            for t in 0..k {
                let w = model.axis.weights[t];
                let g = model.axis.growth[t];
                coeffs.push((model.y_column(f, p, t), -(s * g / d + 0.5) * w));
            }
        }
        rows.push((RowKind::Completion, Constraint { coeffs, sense: Sense::Ge, rhs: 0.0 }));
    }
    for f in 0..flows.len() {
        let mut coeffs = vec![(c_max, 1.0)];
        for p in 0..m {
            for t in 0..k {
                coeffs.push((model.y_column(f, p, t), -model.axis.weights[t]));
            }
        }
        rows.push((RowKind::Duration, Constraint { coeffs, sense: Sense::Ge, rhs: 0.0 }));
    }
    for (kind, row) in rows {
        model.row_kinds.push(kind);
        model.program.constraints.push(row);
    }
    Ok(model)
}

/// One positive `y` entry of a solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct YEntry {
    pub core: usize,
    pub index: usize,
    pub value: f64,
}

/// Largest constraint violation of a solution, by constraint family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub coverage: f64,
    pub capacity: f64,
    pub completion: f64,
    pub duration: f64,
    pub nonnegativity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.coverage.max(self.capacity).max(self.completion).max(self.duration).max(self.nonnegativity)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSolution {
    pub mode: LpMode,
    pub axis: TimeAxis,
    pub flows: Vec<Flow>,
    pub speeds: Vec<f64>,
    /// Sparse `y`: for each flow (in instance order) its positive entries sorted by (core, index).
    pub y: Vec<Vec<YEntry>>,
    pub c_max: f64,
    /// Dual objective, when the backend reports duals.
    pub dual_objective: Option<f64>,
    pub solver: &'static str,
}

impl LpSolution {
    pub fn num_cores(&self) -> usize {
        self.speeds.len()
    }

    pub fn flow_index(&self, id: FlowId) -> Option<usize> {
        self.flows.binary_search_by(|f| f.id.cmp(&id)).ok()
    }

    pub fn support(&self, flow: usize) -> &[YEntry] {
        &self.y[flow]
    }

    pub fn value(&self, flow: usize, core: usize, index: usize) -> f64 {
        self.y[flow]
            .iter()
            .find(|e| e.core == core && e.index == index)
            .map(|e| e.value)
            .unwrap_or(0.0)
    }

    /// `s_p · w · y / d`, the share of the flow placed at this entry.
    pub fn share(&self, flow: usize, entry: &YEntry) -> f64 {
        self.speeds[entry.core] * self.axis.weights[entry.index] * entry.value / self.flows[flow].demand as f64
    }

    /// Total share of a flow; 1 for a feasible solution.
    pub fn mass(&self, flow: usize) -> f64 {
        self.y[flow].iter().map(|e| self.share(flow, e)).sum()
    }

    fn completion_of(&self, flow: usize) -> f64 {
        let d = self.flows[flow].demand as f64;
        self.y[flow]
            .iter()
            .map(|e| {
                let w = self.axis.weights[e.index];
                (self.speeds[e.core] * self.axis.growth[e.index] / d + 0.5) * w * e.value
            })
            .sum()
    }

    fn duration_of(&self, flow: usize) -> f64 {
        self.y[flow].iter().map(|e| self.axis.weights[e.index] * e.value).sum()
    }

    pub fn residuals(&self) -> Residuals {
        let mut r = Residuals::default();
        let k = self.axis.len();
        let m = self.num_cores();
        let mut ports = BTreeMap::<(bool, usize, usize, usize), f64>::new();
        for (f, entries) in self.y.iter().enumerate() {
            r.coverage = r.coverage.max((self.mass(f) - 1.0).abs());
            r.completion = r.completion.max(self.completion_of(f) - self.c_max);
            r.duration = r.duration.max(self.duration_of(f) - self.c_max);
            let id = self.flows[f].id;
            for e in entries {
                debug_assert!(e.core < m && e.index < k);
                r.nonnegativity = r.nonnegativity.max(-e.value);
                *ports.entry((true, id.input, e.core, e.index)).or_default() += e.value;
                *ports.entry((false, id.output, e.core, e.index)).or_default() += e.value;
            }
        }
        r.capacity = ports.values().map(|v| v - 1.0).fold(0.0, f64::max);
        r.completion = r.completion.max(0.0);
        r.duration = r.duration.max(0.0);
        r
    }

    /// Dump keyed by `"i,j,k,p,t"` (ports, coflow and core 1-based; index 0-based).
    pub fn to_json(&self) -> serde_json::Value {
        let mut y = serde_json::Map::new();
        for (f, entries) in self.y.iter().enumerate() {
            let id = self.flows[f].id;
            for e in entries {
                let key = format!("{},{},{},{},{}", id.input + 1, id.output + 1, id.coflow + 1, e.core + 1, e.index);
                y.insert(key, e.value.into());
            }
        }
        serde_json::json!({
            "mode": if self.mode.is_interval() { "interval" } else { "time" },
            "c_max": self.c_max,
            "y": y,
        })
    }
}

/// `C_ijk` evaluated on a solution with the mode's formula.
pub fn flow_completion_bound(solution: &LpSolution, flow: FlowId) -> Result<f64, LpError> {
    let f = solution.flow_index(flow).ok_or(LpError::UnknownFlow(flow))?;
    Ok(solution.completion_of(f))
}

pub fn solve_lp(model: &LpModel, tol: f64) -> Result<LpSolution, LpError> {
    solve_lp_with(model, SolverChoice::Auto, tol)
}

pub fn solve_lp_with(model: &LpModel, choice: SolverChoice, tol: f64) -> Result<LpSolution, LpError> {
    let dense = match choice {
        SolverChoice::Dense => true,
        SolverChoice::Sparse => false,
        SolverChoice::Auto => DenseSimplex::tableau_size(&model.program) <= DENSE_TABLEAU_LIMIT,
    };
    let (first, second): (&dyn LpSolver, &dyn LpSolver) =
        if dense { (&DenseSimplex::default(), &SparseSimplex) } else { (&SparseSimplex, &DenseSimplex::default()) };
    match solve_lp_using(model, first, tol) {
        // numerical trouble in one backend is retried with the other under Auto
        Err(e @ (LpError::IterationLimit(_) | LpError::Tolerance(_))) if choice == SolverChoice::Auto => {
            log::warn!("{} failed ({:?}), retrying with {}", first.name(), e, second.name());
            solve_lp_using(model, second, tol)
        }
        other => other,
    }
}

pub fn solve_lp_using(model: &LpModel, solver: &dyn LpSolver, tol: f64) -> Result<LpSolution, LpError> {
    if model.flows.is_empty() {
        return Err(LpError::NoFlows);
    }
    let raw = solver.solve(&model.program)?;
    let m = model.num_cores();
    let k = model.axis.len();
    let y = (0..model.flows.len())
        .map(|f| {
            let mut entries = Vec::new();
            for p in 0..m {
                for t in 0..k {
                    let v = raw.x[model.y_column(f, p, t)];
                    if v > ZERO_CUTOFF {
                        entries.push(YEntry { core: p, index: t, value: v });
                    }
                }
            }
            entries
        })
        .collect();
    let dual_objective = raw.duals.as_ref().map(|duals| {
        duals.iter().zip(&model.program.constraints).map(|(pi, c)| pi * c.rhs).sum::<f64>()
    });
    let solution = LpSolution {
        mode: model.mode.clone(),
        axis: model.axis.clone(),
        flows: model.flows.clone(),
        speeds: model.speeds.clone(),
        y,
        c_max: raw.x[model.c_max_column()],
        dual_objective,
        solver: solver.name(),
    };
    let res = solution.residuals().max();
    if res > tol {
        return Err(LpError::Tolerance(res));
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(speeds: &[f64], coflows: &[Vec<Vec<u64>>]) -> CoflowInstance {
        CoflowInstance::from_rows(speeds, coflows).unwrap()
    }

    #[test]
    fn time_model_counts() {
        let a = inst(&[1.0], &[vec![vec![1]]]);
        let model = build_time_indexed(&a, BuildOptions::default()).unwrap();
        assert_eq!(model.num_columns(), 3);
        assert_eq!(model.num_rows(), 7);
        assert_eq!(model.rows_of(RowKind::Coverage), 1);
        assert_eq!(model.rows_of(RowKind::InputCapacity), 2);
        assert_eq!(model.rows_of(RowKind::OutputCapacity), 2);
        assert_eq!(model.rows_of(RowKind::Completion), 1);
        assert_eq!(model.rows_of(RowKind::Duration), 1);

        let b = inst(&[1.0, 1.0], &[vec![vec![1, 1], vec![0, 0]]]);
        assert_eq!(time_horizon(&b), 2);
        let model = build_time_indexed(&b, BuildOptions::default()).unwrap();
        assert_eq!(model.num_y_columns(), 12);
        assert_eq!(model.rows_of(RowKind::InputCapacity), 2 * 2 * 3);
    }

    #[test]
    fn empty_flow_set_is_rejected() {
        let err = build(&[], &[1.0], 1, LpMode::TimeIndexed, 1, BuildOptions::default()).unwrap_err();
        assert_eq!(err, LpError::NoFlows);
    }

    #[test]
    fn size_guard() {
        let a = inst(&[1.0], &[vec![vec![5, 5], vec![5, 5]]]);
        let err = build_time_indexed(&a, BuildOptions { max_columns: 10 }).unwrap_err();
        assert!(matches!(err, LpError::TooLarge { columns: 80, cap: 10 }));
    }

    #[test]
    fn interval_model_counts() {
        let a = inst(&[1.0, 2.0], &[vec![vec![2, 1], vec![0, 3]]]);
        let model = build_interval_indexed(&a, 1.0, BuildOptions::default()).unwrap();
        assert_eq!(model.axis.len(), 4);
        assert_eq!(model.num_y_columns(), 3 * 2 * 4);
        let wide = build_interval_indexed(&a, 1e6, BuildOptions::default()).unwrap();
        assert_eq!(wide.mode.grid().unwrap().count, 1);
    }

    #[test]
    fn single_flow_optimum() {
        let a = inst(&[1.0], &[vec![vec![1]]]);
        for choice in [SolverChoice::Dense, SolverChoice::Sparse] {
            let model = build_time_indexed(&a, BuildOptions::default()).unwrap();
            let sol = solve_lp_with(&model, choice, DEFAULT_TOL).unwrap();
            assert!((sol.c_max - 1.0).abs() < 1e-9);
            let c = flow_completion_bound(&sol, FlowId::new(0, 0, 0)).unwrap();
            assert!((c - 1.0).abs() < 1e-9);

            let model = build_interval_indexed(&a, 1.0, BuildOptions::default()).unwrap();
            let sol = solve_lp_with(&model, choice, DEFAULT_TOL).unwrap();
            assert!((sol.c_max - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fast_core_feasible_point() {
        // d = 2 on speeds (1, 2): y = 1 at (core 2, t = 0) moves the whole flow,
        // giving C = 1 * 0.5 + 0.5 = 1 and duration 1.
        let a = inst(&[1.0, 2.0], &[vec![vec![2]]]);
        let model = build_time_indexed(&a, BuildOptions::default()).unwrap();
        let mut x = vec![0.0; model.num_columns()];
        x[model.y_column(0, 1, 0)] = 1.0;
        x[model.c_max_column()] = 1.0;
        assert!(model.program.max_violation(&x) < 1e-12);
        let sol = solve_lp(&model, DEFAULT_TOL).unwrap();
        assert!(sol.c_max <= 1.0 + 1e-9);
    }

    fn handmade(mode: LpMode, axis: TimeAxis, demand: u64, y: Vec<YEntry>) -> LpSolution {
        LpSolution {
            mode,
            axis,
            flows: vec![Flow { id: FlowId::new(0, 0, 0), demand }],
            speeds: vec![1.0],
            y: vec![y],
            c_max: 0.0,
            dual_objective: None,
            solver: "test",
        }
    }

    #[test]
    fn completion_bound_examples() {
        let axis = TimeAxis::for_mode(&LpMode::TimeIndexed, 3);
        let at_zero = handmade(LpMode::TimeIndexed, axis.clone(), 1, vec![YEntry { core: 0, index: 0, value: 1.0 }]);
        assert!((flow_completion_bound(&at_zero, FlowId::new(0, 0, 0)).unwrap() - 1.0).abs() < 1e-12);

        let split = handmade(
            LpMode::TimeIndexed,
            axis,
            2,
            vec![YEntry { core: 0, index: 0, value: 1.0 }, YEntry { core: 0, index: 1, value: 1.0 }],
        );
        // 1/2 * 1/2 + 1/2 * 3/2 + 1/2 * (1 + 1) = 2
        assert!((flow_completion_bound(&split, FlowId::new(0, 0, 0)).unwrap() - 2.0).abs() < 1e-12);

        let grid = interval_grid(1.0, 1).unwrap();
        let mode = LpMode::IntervalIndexed(grid);
        let axis = TimeAxis::for_mode(&mode, 1);
        let interval = handmade(mode, axis, 1, vec![YEntry { core: 0, index: 0, value: 1.0 }]);
        assert!((flow_completion_bound(&interval, FlowId::new(0, 0, 0)).unwrap() - 1.0).abs() < 1e-12);

        assert_eq!(
            flow_completion_bound(&interval, FlowId::new(0, 0, 1)),
            Err(LpError::UnknownFlow(FlowId::new(0, 0, 1)))
        );
    }

    #[test]
    fn dense_and_sparse_agree() {
        let a = inst(&[1.0, 2.0], &[vec![vec![2, 1], vec![0, 3]], vec![vec![0, 2], vec![2, 0]]]);
        for model in [
            build_time_indexed(&a, BuildOptions::default()).unwrap(),
            build_interval_indexed(&a, 0.5, BuildOptions::default()).unwrap(),
        ] {
            let dense = solve_lp_with(&model, SolverChoice::Dense, DEFAULT_TOL).unwrap();
            let sparse = solve_lp_with(&model, SolverChoice::Sparse, DEFAULT_TOL).unwrap();
            assert!((dense.c_max - sparse.c_max).abs() < 1e-6, "{} vs {}", dense.c_max, sparse.c_max);
            let gap = (dense.dual_objective.unwrap() - dense.c_max).abs();
            assert!(gap <= 1e-6 * dense.c_max.max(1.0));
        }
    }

    #[test]
    fn dumps() {
        let a = inst(&[1.0], &[vec![vec![1]]]);
        let model = build_time_indexed(&a, BuildOptions::default()).unwrap();
        let text = model.to_lp_text();
        assert!(text.starts_with("Minimize"));
        assert!(text.contains("y_1_1_1_1_0"));
        let sol = solve_lp(&model, DEFAULT_TOL).unwrap();
        let json = sol.to_json();
        assert!((json["y"]["1,1,1,1,0"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}
