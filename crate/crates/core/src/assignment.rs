//! Rounding an LP solution to a whole-flow assignment.
//!
//! Every flow is committed to one (core, index) pair, either by sampling with
//! probability `s_p · w · y / d` or greedily, flow by flow in tie-break order,
//! minimising the surrogate expected makespan given the choices made so far.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lp::LpSolution;
use crate::model::FlowId;

/// Tolerated deviation of a flow's probability mass from 1 before sampling.
pub const MASS_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("flow {flow} has probability mass {mass}, expected 1")]
    MassMismatch { flow: FlowId, mass: f64 },
    #[error("sampler called with a {0} solution")]
    WrongMode(&'static str),
}

/// The (core, index) pair a flow is committed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Choice {
    pub core: usize,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Assigned {
    pub flow: FlowId,
    pub demand: u64,
    pub choice: Choice,
    /// `t_ijk`: the time index, or the left endpoint of the interval.
    pub priority: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssignmentMap {
    pub interval: bool,
    /// One entry per flow, in the instance's flow order.
    pub entries: Vec<Assigned>,
    /// Seed of the sampler; `None` for the deterministic algorithms.
    pub rng_seed: Option<u64>,
}

impl AssignmentMap {
    fn from_choices(solution: &LpSolution, choices: &[Choice], rng_seed: Option<u64>) -> Self {
        let entries = solution
            .flows
            .iter()
            .zip(choices)
            .map(|(flow, &choice)| Assigned {
                flow: flow.id,
                demand: flow.demand,
                choice,
                priority: solution.axis.priority[choice.index],
            })
            .collect();
        AssignmentMap { interval: solution.mode.is_interval(), entries, rng_seed }
    }

    pub fn choices(&self) -> Vec<Choice> {
        self.entries.iter().map(|e| e.choice).collect()
    }

    pub fn get(&self, flow: FlowId) -> Option<&Assigned> {
        self.entries.iter().find(|e| e.flow == flow)
    }

    /// Dump with 1-based ports, coflow and core.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "i": e.flow.input + 1,
                    "j": e.flow.output + 1,
                    "k": e.flow.coflow + 1,
                    "p": e.choice.core + 1,
                    "index": e.choice.index,
                    "t_ijk": e.priority,
                })
            })
            .collect();
        serde_json::json!({
            "mode": if self.interval { "interval" } else { "time" },
            "rng_seed": self.rng_seed,
            "entries": entries,
        })
    }
}

/// Per-flow `(choice, probability)` lists, renormalised to sum to one.
fn distributions(solution: &LpSolution) -> Result<Vec<Vec<(Choice, f64)>>, AssignError> {
    (0..solution.flows.len())
        .map(|f| {
            let mass = solution.mass(f);
            if (mass - 1.0).abs() > MASS_TOL {
                return Err(AssignError::MassMismatch { flow: solution.flows[f].id, mass });
            }
            Ok(solution
                .support(f)
                .iter()
                .map(|e| (Choice { core: e.core, index: e.index }, solution.share(f, e) / mass))
                .collect())
        })
        .collect()
}

/// Independently samples a choice for every flow.
pub fn sample_assignment(solution: &LpSolution, seed: u64) -> Result<AssignmentMap, AssignError> {
    let dists = distributions(solution)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choices: Vec<Choice> = dists
        .iter()
        .map(|dist| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for &(choice, prob) in dist {
                acc += prob;
                if u < acc {
                    return choice;
                }
            }
            dist.last().expect("mass 1 implies a non-empty support").0
        })
        .collect();
    Ok(AssignmentMap::from_choices(solution, &choices, Some(seed)))
}

/// Sampler for a time-indexed solution.
pub fn sample_time_assignment(solution: &LpSolution, seed: u64) -> Result<AssignmentMap, AssignError> {
    if solution.mode.is_interval() {
        return Err(AssignError::WrongMode("interval-indexed"));
    }
    sample_assignment(solution, seed)
}

/// Sampler for an interval-indexed solution; priorities are interval left endpoints.
pub fn sample_interval_assignment(solution: &LpSolution, seed: u64) -> Result<AssignmentMap, AssignError> {
    if !solution.mode.is_interval() {
        return Err(AssignError::WrongMode("time-indexed"));
    }
    sample_assignment(solution, seed)
}

/// Evaluates the surrogate `E_{P,x}[C_max]` for partial assignments.
///
/// For flow `f` on core `p` at index `t`, the input-port term is
/// `d_f/s_p` plus, over the other flows `g` through the same input port:
/// `d_g/s_p` if `g` is committed to `p` before `t` (or at `t` and `g < f`),
/// otherwise, if `g` is still open, `sum_{l<t} w_l y_{g,p,l}` plus
/// `w_t y_{g,p,t}` when `g < f`. The output port is symmetric.
pub struct Surrogate<'a> {
    solution: &'a LpSolution,
    k: usize,
    dists: Vec<Vec<(Choice, f64)>>,
    /// `before[f][p*k + t] = sum_{l<t} w_l y_{f,p,l}`
    before: Vec<Vec<f64>>,
    /// `at[f][p*k + t] = w_t y_{f,p,t}`
    at: Vec<Vec<f64>>,
    input_peers: Vec<Vec<usize>>,
    output_peers: Vec<Vec<usize>>,
}

impl<'a> Surrogate<'a> {
    pub fn new(solution: &'a LpSolution) -> Result<Self, AssignError> {
        let dists = distributions(solution)?;
        let k = solution.axis.len();
        let m = solution.num_cores();
        let nf = solution.flows.len();
        let mut before = vec![vec![0.0; m * k]; nf];
        let mut at = vec![vec![0.0; m * k]; nf];
        for f in 0..nf {
            for e in solution.support(f) {
                at[f][e.core * k + e.index] = solution.axis.weights[e.index] * e.value;
            }
            for p in 0..m {
                let mut acc = 0.0;
                for t in 0..k {
                    before[f][p * k + t] = acc;
                    acc += at[f][p * k + t];
                }
            }
        }
        let peers = |key: fn(&FlowId) -> usize| -> Vec<Vec<usize>> {
            (0..nf)
                .map(|f| {
                    let port = key(&solution.flows[f].id);
                    (0..nf).filter(|&g| g != f && key(&solution.flows[g].id) == port).collect()
                })
                .collect()
        };
        let input_peers = peers(|id| id.input);
        let output_peers = peers(|id| id.output);
        Ok(Surrogate { solution, k, dists, before, at, input_peers, output_peers })
    }

    pub fn num_flows(&self) -> usize {
        self.dists.len()
    }

    /// Candidates of a flow with positive probability, sorted by (core, index).
    pub fn support(&self, flow: usize) -> impl Iterator<Item = Choice> + '_ {
        self.dists[flow].iter().map(|&(c, _)| c)
    }

    fn port_term(&self, f: usize, peers: &[usize], at: Choice, committed: &[Option<Choice>]) -> f64 {
        let speed = self.solution.speeds[at.core];
        let cell = at.core * self.k + at.index;
        let mut total = self.solution.flows[f].demand as f64 / speed;
        for &g in peers {
            match committed[g] {
                Some(c) => {
                    if c.core == at.core && (c.index < at.index || (c.index == at.index && g < f)) {
                        total += self.solution.flows[g].demand as f64 / speed;
                    }
                }
                None => {
                    total += self.before[g][cell];
                    if g < f {
                        total += self.at[g][cell];
                    }
                }
            }
        }
        total
    }

    /// `E(f, p, t)` for a committed flow, or `D(f)` for an open one.
    pub fn flow_value(&self, f: usize, committed: &[Option<Choice>]) -> f64 {
        let ins = &self.input_peers[f];
        let outs = &self.output_peers[f];
        match committed[f] {
            Some(c) => self.port_term(f, ins, c, committed).max(self.port_term(f, outs, c, committed)),
            None => {
                let (mut ui, mut uj) = (0.0, 0.0);
                for &(c, prob) in &self.dists[f] {
                    ui += prob * self.port_term(f, ins, c, committed);
                    uj += prob * self.port_term(f, outs, c, committed);
                }
                ui.max(uj)
            }
        }
    }

    /// `max(A, B)`; zero when there are no flows.
    pub fn evaluate(&self, committed: &[Option<Choice>]) -> f64 {
        (0..self.num_flows()).map(|f| self.flow_value(f, committed)).fold(0.0, f64::max)
    }

    fn affected(&self, f: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.input_peers[f].iter().chain(&self.output_peers[f]).copied().collect();
        v.push(f);
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Surrogate makespan of a partially committed solution.
pub fn conditional_makespan(solution: &LpSolution, committed: &[Option<Choice>]) -> Result<f64, AssignError> {
    Ok(Surrogate::new(solution)?.evaluate(committed))
}

/// Which candidates the greedy step considers for each flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Candidates {
    /// Only pairs with positive LP mass.
    #[default]
    Support,
    /// Every (core, index) pair.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Derandomized {
    pub assignment: AssignmentMap,
    /// Surrogate before any commitment, then after each commitment.
    pub trace: Vec<f64>,
}

impl Derandomized {
    pub fn final_surrogate(&self) -> f64 {
        *self.trace.last().expect("trace starts with the initial value")
    }

    /// Largest step-to-step increase of the surrogate (<= 0 when monotone).
    pub fn max_increase(&self) -> f64 {
        self.trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Commits flows in tie-break order, each to the candidate minimising the surrogate.
pub fn derandomize(solution: &LpSolution) -> Result<Derandomized, AssignError> {
    derandomize_with(solution, Candidates::Support)
}

pub fn derandomize_with(solution: &LpSolution, candidates: Candidates) -> Result<Derandomized, AssignError> {
    let surrogate = Surrogate::new(solution)?;
    let nf = surrogate.num_flows();
    let mut committed: Vec<Option<Choice>> = vec![None; nf];
    let mut values: Vec<f64> = (0..nf).map(|f| surrogate.flow_value(f, &committed)).collect();
    let mut trace = vec![values.iter().cloned().fold(0.0, f64::max)];
    let all: Vec<Choice> = (0..solution.num_cores())
        .flat_map(|core| (0..solution.axis.len()).map(move |index| Choice { core, index }))
        .collect();

    for f in 0..nf {
        let affected = surrogate.affected(f);
        let rest = (0..nf)
            .filter(|g| affected.binary_search(g).is_err())
            .map(|g| values[g])
            .fold(0.0, f64::max);
        let options: Vec<Choice> = match candidates {
            Candidates::Support => surrogate.support(f).collect(),
            Candidates::All => all.clone(),
        };
        let mut best: Option<(f64, Choice, Vec<f64>)> = None;
        for choice in options {
            committed[f] = Some(choice);
            let updated: Vec<f64> = affected.iter().map(|&g| surrogate.flow_value(g, &committed)).collect();
            let value = updated.iter().cloned().fold(rest, f64::max);
            // candidates arrive sorted by (core, index), so strict improvement keeps the first on ties
            let better = match &best {
                None => true,
                Some((v, _, _)) => value < *v - 1e-12 * v.abs().max(1.0),
            };
            if better {
                best = Some((value, choice, updated));
            }
        }
        let (value, choice, updated) = best.expect("every flow has a candidate");
        committed[f] = Some(choice);
        for (&g, v) in affected.iter().zip(updated) {
            values[g] = v;
        }
        trace.push(value);
    }
    let choices: Vec<Choice> = committed.into_iter().map(|c| c.expect("all committed")).collect();
    Ok(Derandomized { assignment: AssignmentMap::from_choices(solution, &choices, None), trace })
}
