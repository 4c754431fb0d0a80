//! Instance generation, the exhaustive oracle and the experiment runner.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assignment::{self, AssignError, AssignmentMap};
use crate::lp::{self, BuildOptions, LpError, LpSolution, SolverChoice};
use crate::model::{lower_bound, CoflowInstance, ModelError};
use crate::schedule::{self, Metrics, Schedule, ScheduleError, ScheduleReport, TieBreak};

/// Default cap on the number of assignments the oracle enumerates.
pub const ORACLE_CAP: f64 = 1e6;
const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no positive flow after {0} attempts")]
    NoFlows(usize),
    #[error("instance too large for oracle ({cores}^{flows} assignments)")]
    TooLarge { cores: usize, flows: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("LP: {0}")]
    Lp(#[from] LpError),
    #[error("assignment: {0}")]
    Assign(#[from] AssignError),
    #[error("schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorParams {
    pub ports: usize,
    pub cores: usize,
    pub coflows: usize,
    pub density: f64,
    pub d_lo: u64,
    pub d_hi: u64,
    /// Used as the core speeds when it has exactly `cores` entries, otherwise
    /// each core draws its speed uniformly from this set.
    pub speeds: Vec<f64>,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.ports == 0 || self.cores == 0 || self.coflows == 0 {
            return bad("ports, cores and coflows must be positive");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must lie in (0, 1]");
        }
        if self.d_lo < 1 || self.d_lo > self.d_hi {
            return bad("demand range must satisfy 1 <= d_lo <= d_hi");
        }
        if self.speeds.is_empty() || self.speeds.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return bad("speeds must be a non-empty list of positive numbers");
        }
        Ok(())
    }
}

/// Seeded random instance; resamples until some flow is positive.
pub fn generate_instance(params: &GeneratorParams) -> Result<CoflowInstance, BenchError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let speeds: Vec<f64> = if params.speeds.len() == params.cores {
        params.speeds.clone()
    } else {
        (0..params.cores).map(|_| params.speeds[rng.gen_range(0..params.speeds.len())]).collect()
    };
    let n = params.ports;
    for _ in 0..MAX_ATTEMPTS {
        let coflows: Vec<Vec<Vec<u64>>> = (0..params.coflows)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        (0..n)
                            .map(|_| {
                                if rng.gen_bool(params.density) {
                                    rng.gen_range(params.d_lo..=params.d_hi)
                                } else {
                                    0
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        if coflows.iter().flatten().flatten().any(|&d| d > 0) {
            return Ok(CoflowInstance::from_rows(&speeds, &coflows)?);
        }
    }
    Err(BenchError::NoFlows(MAX_ATTEMPTS))
}

/// Minimum of `max_p rho(D_p)/s_p` over all whole-flow core assignments.
pub fn brute_force_makespan(instance: &CoflowInstance) -> Result<f64, BenchError> {
    brute_force_makespan_capped(instance, ORACLE_CAP)
}

pub fn oracle_fits(instance: &CoflowInstance, cap: f64) -> bool {
    (instance.num_cores() as f64).powi(instance.flows().len() as i32) <= cap
}

pub fn brute_force_makespan_capped(instance: &CoflowInstance, cap: f64) -> Result<f64, BenchError> {
    let m = instance.num_cores();
    let flows = instance.flows();
    if !oracle_fits(instance, cap) {
        return Err(BenchError::TooLarge { cores: m, flows: flows.len() });
    }
    let n = instance.num_ports();
    // largest flows first so the bound prunes early
    let mut order: Vec<usize> = (0..flows.len()).collect();
    order.sort_by_key(|&f| std::cmp::Reverse(flows[f].demand));

    struct Search<'a> {
        instance: &'a CoflowInstance,
        order: Vec<usize>,
        n: usize,
        rows: Vec<u64>,
        cols: Vec<u64>,
        best: f64,
    }
    impl Search<'_> {
        fn core_time(&self, p: usize) -> f64 {
            let n = self.n;
            let load = self.rows[p * n..(p + 1) * n].iter().chain(&self.cols[p * n..(p + 1) * n]).max();
            *load.unwrap_or(&0) as f64 / self.instance.speed(p)
        }

        fn dfs(&mut self, depth: usize, current: f64) {
            if current >= self.best {
                return;
            }
            if depth == self.order.len() {
                self.best = current;
                return;
            }
            let flow = self.instance.flows()[self.order[depth]];
            let (i, j, n) = (flow.id.input, flow.id.output, self.n);
            for p in 0..self.instance.num_cores() {
                self.rows[p * n + i] += flow.demand;
                self.cols[p * n + j] += flow.demand;
                let next = current.max(self.core_time(p));
                self.dfs(depth + 1, next);
                self.rows[p * n + i] -= flow.demand;
                self.cols[p * n + j] -= flow.demand;
            }
        }
    }
    let mut search = Search { instance, order, n, rows: vec![0; m * n], cols: vec![0; m * n], best: f64::INFINITY };
    search.dfs(0, 0.0);
    Ok(search.best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    RandTime,
    DetTime,
    RandInterval,
    DetInterval,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::RandTime, Algorithm::DetTime, Algorithm::RandInterval, Algorithm::DetInterval];

    pub fn is_interval(self) -> bool {
        matches!(self, Algorithm::RandInterval | Algorithm::DetInterval)
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Algorithm::RandTime | Algorithm::RandInterval)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RandTime => "rand-time",
            Algorithm::DetTime => "det-time",
            Algorithm::RandInterval => "rand-interval",
            Algorithm::DetInterval => "det-interval",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown algorithm {:?}", s)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub eta: Option<f64>,
    /// Repetitions for randomized algorithms; deterministic ones run once.
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverChoice,
    pub tolerance: f64,
    /// Run the oracle when it fits under `oracle_cap`.
    pub oracle: bool,
    pub oracle_cap: f64,
    /// Fill the `wall_ms` column (makes the CSV non-reproducible).
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, eta: Option<f64>, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            algorithm,
            eta,
            trials,
            seed,
            solver: SolverChoice::Auto,
            tolerance: lp::DEFAULT_TOL,
            oracle: true,
            oracle_cap: ORACLE_CAP,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials < 1 {
            return Err(BenchError::Config("trials must be at least 1".into()));
        }
        match (self.algorithm.is_interval(), self.eta) {
            (true, None) => Err(BenchError::Config(format!("{} requires --eta", self.algorithm))),
            (true, Some(eta)) if !(eta > 0.0) || !eta.is_finite() => {
                Err(BenchError::Config(format!("eta must be positive, got {}", eta)))
            }
            (false, Some(_)) => Err(BenchError::Config(format!("{} takes no eta", self.algorithm))),
            _ => Ok(()),
        }
    }

    pub fn num_runs(&self) -> usize {
        if self.algorithm.is_randomized() {
            self.trials
        } else {
            1
        }
    }
}

/// Builds and solves the LP the algorithm rounds.
pub fn solve_relaxation(
    instance: &CoflowInstance,
    algorithm: Algorithm,
    eta: Option<f64>,
    solver: SolverChoice,
    tolerance: f64,
) -> Result<LpSolution, BenchError> {
    let model = if algorithm.is_interval() {
        let eta = eta.ok_or_else(|| BenchError::Config(format!("{} requires --eta", algorithm)))?;
        lp::build_interval_indexed(instance, eta, BuildOptions::default())?
    } else {
        lp::build_time_indexed(instance, BuildOptions::default())?
    };
    Ok(lp::solve_lp_with(&model, solver, tolerance)?)
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub assignment: AssignmentMap,
    /// Surrogate trace for deterministic algorithms.
    pub trace: Option<Vec<f64>>,
    pub schedule: Schedule,
    pub report: ScheduleReport,
}

/// Rounds `solution` once and schedules the result.
pub fn run_algorithm(
    instance: &CoflowInstance,
    solution: &LpSolution,
    algorithm: Algorithm,
    seed: u64,
) -> Result<TrialOutcome, BenchError> {
    let (assignment, trace) = match algorithm {
        Algorithm::RandTime => (assignment::sample_time_assignment(solution, seed)?, None),
        Algorithm::RandInterval => (assignment::sample_interval_assignment(solution, seed)?, None),
        Algorithm::DetTime | Algorithm::DetInterval => {
            let d = assignment::derandomize(solution)?;
            (d.assignment, Some(d.trace))
        }
    };
    let schedule = schedule::build_schedule(&assignment, instance, TieBreak::for_assignment(&assignment))?;
    let report = schedule::verify_schedule(&schedule, instance);
    Ok(TrialOutcome { assignment, trace, schedule, report })
}

/// One CSV line; `trial` is `None` on the mean row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub algorithm: String,
    pub eta: Option<f64>,
    pub trial: String,
    pub seed: Option<u64>,
    pub lp_opt: f64,
    pub lower_bound: f64,
    pub oracle_opt: Option<f64>,
    pub makespan: f64,
    pub ratio_lp: f64,
    pub ratio_lb: f64,
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub lp_opt: f64,
    pub lower_bound: f64,
    pub oracle_opt: Option<f64>,
    pub all_verified: bool,
    /// Violation messages of failed trials, as `(trial, message)`.
    pub failures: Vec<(usize, String)>,
    pub metrics: Vec<Metrics>,
    /// The first trial's schedule.
    pub first_schedule: Schedule,
}

impl ExperimentResult {
    pub fn mean_makespan(&self) -> f64 {
        self.metrics.iter().map(|m| m.makespan).sum::<f64>() / self.metrics.len() as f64
    }
}

pub fn run_experiment(
    instance: &CoflowInstance,
    instance_id: &str,
    config: &ExperimentConfig,
) -> Result<ExperimentResult, BenchError> {
    config.validate()?;
    let lb = lower_bound(instance)?;
    let oracle_opt = if config.oracle && oracle_fits(instance, config.oracle_cap) {
        Some(brute_force_makespan_capped(instance, config.oracle_cap)?)
    } else {
        None
    };
    let lp_start = Instant::now();
    let solution = solve_relaxation(instance, config.algorithm, config.eta, config.solver, config.tolerance)?;
    let lp_ms = lp_start.elapsed().as_secs_f64() * 1e3;
    let lp_opt = solution.c_max;
    log::info!("{}: {} LP optimum {} ({} solver)", instance_id, config.algorithm, lp_opt, solution.solver);

    let runs = config.num_runs();
    let outcomes: Vec<(TrialOutcome, f64)> = (0..runs)
        .into_par_iter()
        .map(|trial| {
            let start = Instant::now();
            let out = run_algorithm(instance, &solution, config.algorithm, config.seed + trial as u64)?;
            Ok((out, start.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<_, BenchError>>()?;

    let mut rows = Vec::with_capacity(runs + 1);
    let mut metrics = Vec::with_capacity(runs);
    let mut failures = Vec::new();
    for (trial, (out, ms)) in outcomes.iter().enumerate() {
        for v in &out.report.violations {
            failures.push((trial, v.to_string()));
        }
        let m = schedule::evaluate(&out.schedule, lp_opt, lb)?;
        rows.push(ResultRow {
            instance_id: instance_id.to_string(),
            algorithm: config.algorithm.to_string(),
            eta: config.eta,
            trial: trial.to_string(),
            seed: Some(config.seed + trial as u64),
            lp_opt,
            lower_bound: lb,
            oracle_opt,
            makespan: m.makespan,
            ratio_lp: m.ratio_lp,
            ratio_lb: m.ratio_lb,
            wall_ms: config.timing.then_some(lp_ms + ms),
        });
        metrics.push(m);
    }
    if config.algorithm.is_randomized() {
        let mean = |f: fn(&ResultRow) -> f64| rows.iter().map(f).sum::<f64>() / runs as f64;
        let wall = config.timing.then(|| rows.iter().filter_map(|r| r.wall_ms).sum::<f64>() / runs as f64);
        rows.push(ResultRow {
            instance_id: instance_id.to_string(),
            algorithm: config.algorithm.to_string(),
            eta: config.eta,
            trial: "mean".to_string(),
            seed: None,
            lp_opt,
            lower_bound: lb,
            oracle_opt,
            makespan: mean(|r| r.makespan),
            ratio_lp: mean(|r| r.ratio_lp),
            ratio_lb: mean(|r| r.ratio_lb),
            wall_ms: wall,
        });
    }
    let first_schedule = outcomes.into_iter().next().expect("at least one run").0.schedule;
    Ok(ExperimentResult {
        rows,
        lp_opt,
        lower_bound: lb,
        oracle_opt,
        all_verified: failures.is_empty(),
        failures,
        metrics,
        first_schedule,
    })
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> GeneratorParams {
        GeneratorParams { ports: 3, cores: 2, coflows: 2, density: 0.5, d_lo: 1, d_hi: 4, speeds: vec![1.0, 2.0], seed }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_instance(&params(5)).unwrap(), generate_instance(&params(5)).unwrap());
    }

    #[test]
    fn generator_density_and_range() {
        let full = GeneratorParams { density: 1.0, ..params(1) };
        assert_eq!(generate_instance(&full).unwrap().flows().len(), 18);
        let ones = GeneratorParams { d_lo: 1, d_hi: 1, ..params(2) };
        assert!(generate_instance(&ones).unwrap().flows().iter().all(|f| f.demand == 1));
        let drawn = GeneratorParams { cores: 3, speeds: vec![1.0, 2.0], ..params(3) };
        let inst = generate_instance(&drawn).unwrap();
        assert_eq!(inst.num_cores(), 3);
        assert!(inst.speeds().iter().all(|s| [1.0, 2.0].contains(s)));
    }

    #[test]
    fn generator_rejects_bad_params() {
        assert!(generate_instance(&GeneratorParams { density: 0.0, ..params(0) }).is_err());
        assert!(generate_instance(&GeneratorParams { d_lo: 0, ..params(0) }).is_err());
        assert!(generate_instance(&GeneratorParams { d_lo: 5, d_hi: 4, ..params(0) }).is_err());
        let sparse = GeneratorParams { ports: 1, coflows: 1, density: 1e-9, ..params(0) };
        assert!(matches!(generate_instance(&sparse), Err(BenchError::NoFlows(100))));
    }

    #[test]
    fn oracle_examples() {
        let inst = CoflowInstance::from_rows(&[1.0, 2.0], &[vec![vec![2]]]).unwrap();
        assert_eq!(brute_force_makespan(&inst).unwrap(), 1.0);
        let inst = CoflowInstance::from_rows(&[1.0, 1.0], &[vec![vec![1, 1], vec![0, 0]]]).unwrap();
        assert_eq!(brute_force_makespan(&inst).unwrap(), 1.0);
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![2, 1], vec![1, 2]]]).unwrap();
        assert_eq!(brute_force_makespan(&inst).unwrap(), 3.0);
    }

    #[test]
    fn oracle_cap() {
        let full = GeneratorParams { ports: 4, coflows: 2, density: 1.0, ..params(0) };
        let inst = generate_instance(&full).unwrap();
        let err = brute_force_makespan(&inst).unwrap_err();
        assert!(err.to_string().contains("instance too large for oracle"));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("greedy".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_requires_eta_for_interval() {
        assert!(ExperimentConfig::new(Algorithm::DetInterval, None, 1, 0).validate().is_err());
        assert!(ExperimentConfig::new(Algorithm::DetInterval, Some(0.0), 1, 0).validate().is_err());
        assert!(ExperimentConfig::new(Algorithm::DetTime, Some(0.5), 1, 0).validate().is_err());
        assert!(ExperimentConfig::new(Algorithm::RandTime, None, 0, 0).validate().is_err());
        assert!(ExperimentConfig::new(Algorithm::RandInterval, Some(0.2), 3, 0).validate().is_ok());
    }

    #[test]
    fn det_time_single_flow() {
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![1]]]).unwrap();
        let res = run_experiment(&inst, "single", &ExperimentConfig::new(Algorithm::DetTime, None, 1, 0)).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.rows[0].makespan, 1.0);
        assert!((res.rows[0].ratio_lp - 1.0).abs() < 1e-9);
        assert!(res.all_verified);
    }

    #[test]
    fn randomized_rows_and_determinism() {
        let inst = generate_instance(&params(11)).unwrap();
        let config = ExperimentConfig::new(Algorithm::RandTime, None, 5, 7);
        let a = run_experiment(&inst, "g11", &config).unwrap();
        assert_eq!(a.rows.len(), 6);
        assert_eq!(a.rows[5].trial, "mean");
        let seeds: Vec<_> = a.rows[..5].iter().map(|r| r.seed.unwrap()).collect();
        assert_eq!(seeds, vec![7, 8, 9, 10, 11]);
        let b = run_experiment(&inst, "g11", &config).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_csv(&a.rows, &mut ca).unwrap();
        write_csv(&b.rows, &mut cb).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with(
            "instance_id,algorithm,eta,trial,seed,lp_opt,lower_bound,oracle_opt,makespan,ratio_lp,ratio_lb,wall_ms\n"
        ));
    }
}
