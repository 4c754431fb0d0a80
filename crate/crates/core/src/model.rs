//! Problem instances: ports, core speeds and per-coflow demand matrices,
//! together with the closed-form quantities the algorithms derive from them
//! (port loads, matrix load, lower bound, time horizon and interval grid).

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when testing `(1+eta)^L >= T+1`.
pub const GRID_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance is invalid: {0}")]
    Invalid(String),
    #[error("all demands are zero")]
    NoDemand,
    #[error("malformed instance file: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A square matrix of integer data units, stored row-major.
/// Row index is the input port, column index the output port.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<u64>>", try_from = "Vec<Vec<u64>>")]
pub struct DemandMatrix {
    n: usize,
    data: Vec<u64>,
}

impl DemandMatrix {
    pub fn zeros(n: usize) -> Self {
        DemandMatrix { n, data: vec![0; n * n] }
    }

    /// Builds a matrix from rows; fails when the rows are ragged or not square.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self, ModelError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(ModelError::Malformed(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(DemandMatrix { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: u64) {
        self.data[i * self.n + j] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: u64) {
        self.data[i * self.n + j] += value;
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.data[i * self.n..(i + 1) * self.n].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n).map(|i| self.row_sum(i)).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n).map(|j| self.col_sum(j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = DemandMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Positive cells in row-major order.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(move |(idx, &v)| (idx / self.n, idx % self.n, v))
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }
}

impl fmt::Debug for DemandMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl From<DemandMatrix> for Vec<Vec<u64>> {
    fn from(m: DemandMatrix) -> Self {
        m.rows()
    }
}

impl TryFrom<Vec<Vec<u64>>> for DemandMatrix {
    type Error = ModelError;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self, Self::Error> {
        DemandMatrix::from_rows(&rows)
    }
}

/// Load of a matrix: the largest row or column sum.
pub fn rho(d: &DemandMatrix) -> u64 {
    let rows = d.row_sums().into_iter().max().unwrap_or(0);
    let cols = d.col_sums().into_iter().max().unwrap_or(0);
    rows.max(cols)
}

/// A flow `(i, j, k)`: input port, output port, coflow. Indices are zero-based.
///
/// The derived ordering compares the coflow first, then the output port, then
/// the input port, which is the tie-breaking order used by the deterministic
/// algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowId {
    pub input: usize,
    pub output: usize,
    pub coflow: usize,
}

impl FlowId {
    pub fn new(input: usize, output: usize, coflow: usize) -> Self {
        FlowId { input, output, coflow }
    }

    fn order_key(&self) -> (usize, usize, usize) {
        (self.coflow, self.output, self.input)
    }
}

impl Ord for FlowId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for FlowId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.input + 1, self.output + 1, self.coflow + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Flow {
    pub id: FlowId,
    pub demand: u64,
}

/// Instance as it appears on disk. Demands are kept as raw numbers so that the
/// validator can report negative and fractional entries instead of failing to parse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub num_ports: usize,
    pub core_speeds: Vec<f64>,
    pub coflows: Vec<Vec<Vec<f64>>>,
}

impl RawInstance {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: RawInstance = serde_json::from_str(text)?;
        raw.check_shape()?;
        Ok(raw)
    }

    fn check_shape(&self) -> Result<(), ModelError> {
        for (k, m) in self.coflows.iter().enumerate() {
            if m.len() != self.num_ports {
                return Err(ModelError::Malformed(format!(
                    "coflow {} has {} rows, expected {}",
                    k + 1,
                    m.len(),
                    self.num_ports
                )));
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != self.num_ports {
                    return Err(ModelError::Malformed(format!(
                        "coflow {} row {} has {} entries, expected {}",
                        k + 1,
                        i + 1,
                        row.len(),
                        self.num_ports
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Issue {
    EmptyInstance(String),
    NonpositiveSpeed { core: usize, speed: String },
    NegativeDemand(FlowId),
    NonIntegerDemand(FlowId),
    ShapeMismatch(String),
    NoPositiveDemand,
    /// Advisory: `d / s_max < 1` for this flow.
    NormalizationViolated(FlowId),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::EmptyInstance(what) => write!(f, "empty instance: {}", what),
            Issue::NonpositiveSpeed { core, speed } => {
                write!(f, "nonpositive speed {} on core {}", speed, core + 1)
            }
            Issue::NegativeDemand(id) => write!(f, "negative demand for flow {}", id),
            Issue::NonIntegerDemand(id) => write!(f, "non-integer demand for flow {}", id),
            Issue::ShapeMismatch(msg) => write!(f, "shape mismatch: {}", msg),
            Issue::NoPositiveDemand => write!(f, "no positive demand"),
            Issue::NormalizationViolated(id) => {
                write!(f, "normalization violated: d/s_max < 1 for flow {}", id)
            }
        }
    }
}

/// Hard errors and advisories found by [`validate_instance`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub advisories: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks the modelling assumptions on a raw instance.
pub fn validate_instance(raw: &RawInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = raw.num_ports;
    if n == 0 {
        report.errors.push(Issue::EmptyInstance("no ports".into()));
    }
    if raw.core_speeds.is_empty() {
        report.errors.push(Issue::EmptyInstance("no cores".into()));
    }
    if raw.coflows.is_empty() {
        report.errors.push(Issue::EmptyInstance("no coflows".into()));
    }
    for (p, &s) in raw.core_speeds.iter().enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            report.errors.push(Issue::NonpositiveSpeed { core: p, speed: s.to_string() });
        }
    }
    if let Err(e) = raw.check_shape() {
        report.errors.push(Issue::ShapeMismatch(e.to_string()));
        return report;
    }
    let s_max = raw.core_speeds.iter().cloned().fold(f64::NAN, f64::max);
    let mut any_positive = false;
    for (k, m) in raw.coflows.iter().enumerate() {
        for (i, row) in m.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                let id = FlowId::new(i, j, k);
                if !d.is_finite() || d.fract() != 0.0 {
                    report.errors.push(Issue::NonIntegerDemand(id));
                } else if d < 0.0 {
                    report.errors.push(Issue::NegativeDemand(id));
                } else if d > 0.0 {
                    any_positive = true;
                    if s_max > 0.0 && d / s_max < 1.0 {
                        report.advisories.push(Issue::NormalizationViolated(id));
                    }
                }
            }
        }
    }
    if !any_positive && !raw.coflows.is_empty() && n > 0 {
        report.errors.push(Issue::NoPositiveDemand);
    }
    report
}

/// A validated problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct CoflowInstance {
    num_ports: usize,
    core_speeds: Vec<f64>,
    coflows: Vec<DemandMatrix>,
    flows: Vec<Flow>,
}

impl CoflowInstance {
    pub fn new(
        num_ports: usize,
        core_speeds: Vec<f64>,
        coflows: Vec<DemandMatrix>,
    ) -> Result<Self, ModelError> {
        let raw = RawInstance {
            num_ports,
            core_speeds,
            coflows: coflows
                .iter()
                .map(|m| m.rows().into_iter().map(|r| r.into_iter().map(|v| v as f64).collect()).collect())
                .collect(),
        };
        CoflowInstance::try_from(raw)
    }

    /// Convenience constructor from nested row vectors.
    pub fn from_rows(speeds: &[f64], coflows: &[Vec<Vec<u64>>]) -> Result<Self, ModelError> {
        let n = coflows.first().map(|c| c.len()).unwrap_or(0);
        let mats = coflows
            .iter()
            .map(|c| DemandMatrix::from_rows(c))
            .collect::<Result<Vec<_>, _>>()?;
        CoflowInstance::new(n, speeds.to_vec(), mats)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let raw = RawInstance::from_json(&text)?;
        CoflowInstance::try_from(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawInstance::from(self.clone())).expect("instance serializes")
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn num_cores(&self) -> usize {
        self.core_speeds.len()
    }

    pub fn num_coflows(&self) -> usize {
        self.coflows.len()
    }

    pub fn speeds(&self) -> &[f64] {
        &self.core_speeds
    }

    pub fn speed(&self, core: usize) -> f64 {
        self.core_speeds[core]
    }

    pub fn s_min(&self) -> f64 {
        self.core_speeds.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn s_max(&self) -> f64 {
        self.core_speeds.iter().cloned().fold(0.0, f64::max)
    }

    pub fn coflow(&self, k: usize) -> &DemandMatrix {
        &self.coflows[k]
    }

    pub fn coflows(&self) -> &[DemandMatrix] {
        &self.coflows
    }

    pub fn demand(&self, id: FlowId) -> u64 {
        self.coflows[id.coflow].get(id.input, id.output)
    }

    /// All flows with positive demand, sorted by the tie-breaking order.
    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    /// Position of a flow in [`CoflowInstance::flows`].
    pub fn flow_index(&self, id: FlowId) -> Option<usize> {
        self.flows.binary_search_by(|f| f.id.cmp(&id)).ok()
    }

    pub fn d_min(&self) -> u64 {
        self.flows.iter().map(|f| f.demand).min().unwrap_or(0)
    }

    /// Advisories (normalization) for an already validated instance.
    pub fn advisories(&self) -> Vec<Issue> {
        validate_instance(&RawInstance::from(self.clone())).advisories
    }
}

impl TryFrom<RawInstance> for CoflowInstance {
    type Error = ModelError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        let report = validate_instance(&raw);
        if !report.is_valid() {
            let msg = report.errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
            return Err(ModelError::Invalid(msg));
        }
        for adv in &report.advisories {
            log::warn!("{}", adv);
        }
        let n = raw.num_ports;
        let mut coflows = Vec::with_capacity(raw.coflows.len());
        let mut flows = Vec::new();
        for (k, m) in raw.coflows.iter().enumerate() {
            let mut mat = DemandMatrix::zeros(n);
            for (i, row) in m.iter().enumerate() {
                for (j, &d) in row.iter().enumerate() {
                    let d = d as u64;
                    mat.set(i, j, d);
                    if d > 0 {
                        flows.push(Flow { id: FlowId::new(i, j, k), demand: d });
                    }
                }
            }
            coflows.push(mat);
        }
        flows.sort_by_key(|f| f.id);
        Ok(CoflowInstance { num_ports: n, core_speeds: raw.core_speeds, coflows, flows })
    }
}

impl From<CoflowInstance> for RawInstance {
    fn from(inst: CoflowInstance) -> Self {
        RawInstance {
            num_ports: inst.num_ports,
            core_speeds: inst.core_speeds,
            coflows: inst
                .coflows
                .iter()
                .map(|m| m.rows().into_iter().map(|r| r.into_iter().map(|v| v as f64).collect()).collect())
                .collect(),
        }
    }
}

/// Per-coflow input and output port loads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortLoads {
    /// `input[k][i] = sum_j d_ijk`
    pub input: Vec<Vec<u64>>,
    /// `output[k][j] = sum_i d_ijk`
    pub output: Vec<Vec<u64>>,
}

impl PortLoads {
    /// `sum_k L_ik` for every input port.
    pub fn total_input(&self) -> Vec<u64> {
        sum_over_coflows(&self.input)
    }

    /// `sum_k L_jk` for every output port.
    pub fn total_output(&self) -> Vec<u64> {
        sum_over_coflows(&self.output)
    }
}

fn sum_over_coflows(per_coflow: &[Vec<u64>]) -> Vec<u64> {
    let n = per_coflow.first().map(|v| v.len()).unwrap_or(0);
    (0..n).map(|p| per_coflow.iter().map(|v| v[p]).sum()).collect()
}

pub fn port_loads(instance: &CoflowInstance) -> PortLoads {
    PortLoads {
        input: instance.coflows.iter().map(|m| m.row_sums()).collect(),
        output: instance.coflows.iter().map(|m| m.col_sums()).collect(),
    }
}

/// Largest total load on any single port, summed over coflows.
pub fn max_port_load(instance: &CoflowInstance) -> u64 {
    let loads = port_loads(instance);
    let a = loads.total_input().into_iter().max().unwrap_or(0);
    let b = loads.total_output().into_iter().max().unwrap_or(0);
    a.max(b)
}

/// `LB = max port load / sum of core speeds`.
pub fn lower_bound(instance: &CoflowInstance) -> Result<f64, ModelError> {
    let load = max_port_load(instance);
    if load == 0 {
        return Err(ModelError::NoDemand);
    }
    let total_speed: f64 = instance.core_speeds.iter().sum();
    Ok(load as f64 / total_speed)
}

/// Time horizon `T`; the time indices are `0..=T`.
pub fn time_horizon(instance: &CoflowInstance) -> usize {
    let loads = port_loads(instance);
    let a = loads.total_input().into_iter().max().unwrap_or(0);
    let b = loads.total_output().into_iter().max().unwrap_or(0);
    let x = (a + b) as f64 / instance.s_min() - 1.0;
    if x <= 0.0 {
        return 0;
    }
    // ceil, with slack for values like 6.000000000001 coming from division
    let c = (x - 1e-9 * x.max(1.0)).ceil();
    c.max(0.0) as usize
}

/// Geometric interval grid: `I_0 = [0,1]`, `I_l = ((1+eta)^(l-1), (1+eta)^l]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrid {
    pub eta: f64,
    pub horizon: usize,
    /// `L`, the largest interval index.
    pub count: usize,
    /// Right endpoints `(1+eta)^l` for `l = 0..=L`.
    pub boundaries: Vec<f64>,
    /// `|I_l|` for `l = 0..=L`.
    pub lengths: Vec<f64>,
}

impl IntervalGrid {
    pub fn num_intervals(&self) -> usize {
        self.count + 1
    }

    pub fn left_endpoint(&self, l: usize) -> f64 {
        if l == 0 {
            0.0
        } else {
            self.boundaries[l - 1]
        }
    }

    /// `(1+eta)^(l-1)`, taken as 1/2 for `l = 0`.
    pub fn growth(&self, l: usize) -> f64 {
        if l == 0 {
            0.5
        } else {
            self.boundaries[l - 1]
        }
    }
}

pub fn interval_grid(eta: f64, horizon: usize) -> Result<IntervalGrid, ModelError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(ModelError::Invalid(format!("eta must be positive, got {}", eta)));
    }
    let target = (horizon + 1) as f64;
    let base = 1.0 + eta;
    let mut boundaries = vec![1.0];
    let mut lengths = vec![1.0];
    let mut power = 1.0_f64;
    while power < target * (1.0 - GRID_REL_TOL) {
        let prev = power;
        power *= base;
        boundaries.push(power);
        lengths.push(eta * prev);
    }
    Ok(IntervalGrid { eta, horizon, count: boundaries.len() - 1, boundaries, lengths })
}
