//! Per-core BvN schedules for a whole-flow assignment, with verification and metrics.
//!
//! A data-unit slot on core `p` lasts `1/s_p` time units, so slot `w` (1-based)
//! ends at real time `w / s_p`. Cores run independently.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assignment::AssignmentMap;
use crate::bvn::{schedule_aggregated, BvnError, CellQueues, SlotUnit};
use crate::model::{rho, CoflowInstance, DemandMatrix, FlowId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error(transparent)]
    Bvn(#[from] BvnError),
    #[error("assignment covers {got} flows, instance has {expected}")]
    Incomplete { got: usize, expected: usize },
    #[error("assignment entry {0} does not match the instance")]
    UnknownFlow(FlowId),
    #[error("assignment uses core {core} but the instance has {cores}")]
    BadCore { core: usize, cores: usize },
    #[error("LP optimum must be positive, got {0}")]
    NonpositiveLp(f64),
}

/// How flows with equal priority are ordered inside a cell queue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    /// By flow id (coflow, then output, then input).
    Canonical,
    /// By a random key drawn from this seed, flow id as the last resort.
    Seeded(u64),
}

impl TieBreak {
    /// Canonical for deterministic runs, seeded for sampled ones.
    pub fn for_assignment(assignment: &AssignmentMap) -> Self {
        match assignment.rng_seed {
            Some(seed) => TieBreak::Seeded(seed),
            None => TieBreak::Canonical,
        }
    }
}

/// The demand assigned to one core and the order flows leave each cell.
#[derive(Clone, Debug)]
pub struct CoreLoad {
    pub core: usize,
    pub matrix: DemandMatrix,
    pub queues: CellQueues<FlowId>,
}

fn check_assignment(assignment: &AssignmentMap, instance: &CoflowInstance) -> Result<(), ScheduleError> {
    let flows = instance.flows();
    if assignment.entries.len() != flows.len() {
        return Err(ScheduleError::Incomplete { got: assignment.entries.len(), expected: flows.len() });
    }
    for (entry, flow) in assignment.entries.iter().zip(flows) {
        if entry.flow != flow.id || entry.demand != flow.demand {
            return Err(ScheduleError::UnknownFlow(entry.flow));
        }
        if entry.choice.core >= instance.num_cores() {
            return Err(ScheduleError::BadCore { core: entry.choice.core, cores: instance.num_cores() });
        }
    }
    Ok(())
}

/// Sums the flows assigned to each core into `D_p`, queueing each cell by priority.
pub fn aggregate_per_core(
    assignment: &AssignmentMap,
    instance: &CoflowInstance,
    tie: TieBreak,
) -> Result<Vec<CoreLoad>, ScheduleError> {
    check_assignment(assignment, instance)?;
    let n = instance.num_ports();
    let tie_keys: Vec<u64> = match tie {
        TieBreak::Canonical => vec![0; assignment.entries.len()],
        TieBreak::Seeded(seed) => {
            // separate stream so the keys are independent of the sampler's draws
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            (0..assignment.entries.len()).map(|_| rng.gen()).collect()
        }
    };
    let mut order: Vec<usize> = (0..assignment.entries.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&assignment.entries[a], &assignment.entries[b]);
        ea.priority
            .total_cmp(&eb.priority)
            .then(tie_keys[a].cmp(&tie_keys[b]))
            .then(ea.flow.cmp(&eb.flow))
    });
    let mut loads: Vec<CoreLoad> = (0..instance.num_cores())
        .map(|core| CoreLoad { core, matrix: DemandMatrix::zeros(n), queues: CellQueues::new(n) })
        .collect();
    for idx in order {
        let e = &assignment.entries[idx];
        let load = &mut loads[e.choice.core];
        load.matrix.add(e.flow.input, e.flow.output, e.demand);
        load.queues.push(e.flow.input, e.flow.output, e.flow, e.demand);
    }
    Ok(loads)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoreSchedule {
    pub core: usize,
    pub speed: f64,
    pub rho: u64,
    /// `slots[w]` holds the units sent in slot `w + 1`.
    pub slots: Vec<Vec<SlotUnit<FlowId>>>,
}

impl CoreSchedule {
    pub fn finish_time(&self) -> f64 {
        self.rho as f64 / self.speed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowCompletion {
    pub flow: FlowId,
    pub core: usize,
    /// 1-based slot of the last unit.
    pub slot: u64,
    pub time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    pub cores: Vec<CoreSchedule>,
    /// In the instance's flow order.
    pub flow_completions: Vec<FlowCompletion>,
    pub coflow_completions: Vec<f64>,
    pub makespan: f64,
}

impl Schedule {
    pub fn completion(&self, flow: FlowId) -> Option<&FlowCompletion> {
        self.flow_completions.iter().find(|c| c.flow == flow)
    }

    /// Per core, the slots as lists of 1-based `[i, j, k]` triples.
    pub fn to_json(&self) -> serde_json::Value {
        let cores: Vec<_> = self
            .cores
            .iter()
            .map(|c| {
                let slots: Vec<Vec<[usize; 3]>> = c
                    .slots
                    .iter()
                    .map(|slot| {
                        slot.iter()
                            .map(|u| [u.flow.input + 1, u.flow.output + 1, u.flow.coflow + 1])
                            .collect()
                    })
                    .collect();
                serde_json::json!({ "core": c.core + 1, "speed": c.speed, "rho": c.rho, "slots": slots })
            })
            .collect();
        serde_json::json!({
            "makespan": self.makespan,
            "coflow_completions": self.coflow_completions,
            "cores": cores,
        })
    }
}

/// Schedules every core's aggregated coflow with BvN.
pub fn build_schedule(
    assignment: &AssignmentMap,
    instance: &CoflowInstance,
    tie: TieBreak,
) -> Result<Schedule, ScheduleError> {
    let loads = aggregate_per_core(assignment, instance, tie)?;
    let per_core: Vec<_> = loads
        .par_iter()
        .map(|load| schedule_aggregated(&load.matrix, &load.queues).map(|s| (load, s)))
        .collect::<Result<_, _>>()?;

    let mut completion_of = vec![None; instance.flows().len()];
    let mut cores = Vec::with_capacity(per_core.len());
    for (load, sched) in per_core {
        let speed = instance.speed(load.core);
        for &(flow, slot) in &sched.completions {
            let idx = instance.flow_index(flow).ok_or(ScheduleError::UnknownFlow(flow))?;
            completion_of[idx] = Some(FlowCompletion { flow, core: load.core, slot, time: slot as f64 / speed });
        }
        cores.push(CoreSchedule { core: load.core, speed, rho: rho(&load.matrix), slots: sched.slots });
    }
    let flow_completions: Vec<FlowCompletion> = completion_of
        .into_iter()
        .zip(instance.flows())
        .map(|(c, f)| c.ok_or(ScheduleError::UnknownFlow(f.id)))
        .collect::<Result<_, _>>()?;
    let mut coflow_completions = vec![0.0f64; instance.num_coflows()];
    for c in &flow_completions {
        let slot = &mut coflow_completions[c.flow.coflow];
        *slot = slot.max(c.time);
    }
    let makespan = cores.iter().map(CoreSchedule::finish_time).fold(0.0, f64::max);
    Ok(Schedule { cores, flow_completions, coflow_completions, makespan })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    InputConflict { core: usize, slot: usize, port: usize },
    OutputConflict { core: usize, slot: usize, port: usize },
    WrongCell { flow: FlowId, core: usize, slot: usize },
    UnknownFlow(FlowId),
    SplitFlow(FlowId),
    UnderDelivery { flow: FlowId, sent: u64, demand: u64 },
    OverDelivery { flow: FlowId, sent: u64, demand: u64 },
    CompletionMismatch { flow: FlowId, recorded: f64, actual: f64 },
    SlotCount { core: usize, slots: usize, rho: u64 },
    MakespanMismatch { recorded: f64, actual: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InputConflict { core, slot, port } => {
                write!(f, "input port conflict: port {} twice in slot {} on core {}", port + 1, slot + 1, core + 1)
            }
            Violation::OutputConflict { core, slot, port } => {
                write!(f, "output port conflict: port {} twice in slot {} on core {}", port + 1, slot + 1, core + 1)
            }
            Violation::WrongCell { flow, core, slot } => {
                write!(f, "flow {} sent through the wrong ports in slot {} on core {}", flow, slot + 1, core + 1)
            }
            Violation::UnknownFlow(flow) => write!(f, "unknown flow {}", flow),
            Violation::SplitFlow(flow) => write!(f, "flow {} sent on more than one core", flow),
            Violation::UnderDelivery { flow, sent, demand } => {
                write!(f, "under-delivery: flow {} sent {} of {} units", flow, sent, demand)
            }
            Violation::OverDelivery { flow, sent, demand } => {
                write!(f, "over-delivery: flow {} sent {} of {} units", flow, sent, demand)
            }
            Violation::CompletionMismatch { flow, recorded, actual } => {
                write!(f, "completion mismatch: flow {} recorded {} but finishes at {}", flow, recorded, actual)
            }
            Violation::SlotCount { core, slots, rho } => {
                write!(f, "core {} uses {} slots, load is {}", core + 1, slots, rho)
            }
            Violation::MakespanMismatch { recorded, actual } => {
                write!(f, "makespan mismatch: recorded {} but schedule ends at {}", recorded, actual)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub violations: Vec<Violation>,
}

impl ScheduleReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

const TIME_TOL: f64 = 1e-9;

/// Re-checks port capacity, delivery and completion bookkeeping from the slots alone.
pub fn verify_schedule(schedule: &Schedule, instance: &CoflowInstance) -> ScheduleReport {
    let n = instance.num_ports();
    let nf = instance.flows().len();
    let mut violations = Vec::new();
    let mut sent = vec![0u64; nf];
    let mut core_of: Vec<Option<usize>> = vec![None; nf];
    let mut last_slot = vec![0usize; nf];
    let mut split = vec![false; nf];

    for core in &schedule.cores {
        for (w, slot) in core.slots.iter().enumerate() {
            let mut in_used = vec![false; n];
            let mut out_used = vec![false; n];
            for unit in slot {
                if unit.input >= n || unit.output >= n {
                    violations.push(Violation::WrongCell { flow: unit.flow, core: core.core, slot: w });
                    continue;
                }
                if std::mem::replace(&mut in_used[unit.input], true) {
                    violations.push(Violation::InputConflict { core: core.core, slot: w, port: unit.input });
                }
                if std::mem::replace(&mut out_used[unit.output], true) {
                    violations.push(Violation::OutputConflict { core: core.core, slot: w, port: unit.output });
                }
                if unit.flow.input != unit.input || unit.flow.output != unit.output {
                    violations.push(Violation::WrongCell { flow: unit.flow, core: core.core, slot: w });
                }
                let Some(idx) = instance.flow_index(unit.flow) else {
                    violations.push(Violation::UnknownFlow(unit.flow));
                    continue;
                };
                sent[idx] += 1;
                match core_of[idx] {
                    None => core_of[idx] = Some(core.core),
                    Some(c) if c != core.core && !split[idx] => {
                        split[idx] = true;
                        violations.push(Violation::SplitFlow(unit.flow));
                    }
                    _ => {}
                }
                last_slot[idx] = last_slot[idx].max(w + 1);
            }
        }
        let used = core.slots.len();
        if used as u64 != core.rho {
            violations.push(Violation::SlotCount { core: core.core, slots: used, rho: core.rho });
        }
    }

    let mut actual_makespan = 0.0f64;
    for (idx, flow) in instance.flows().iter().enumerate() {
        let (s, d) = (sent[idx], flow.demand);
        if s < d {
            violations.push(Violation::UnderDelivery { flow: flow.id, sent: s, demand: d });
        } else if s > d {
            violations.push(Violation::OverDelivery { flow: flow.id, sent: s, demand: d });
        }
        let Some(core) = core_of[idx] else { continue };
        let actual = last_slot[idx] as f64 / instance.speed(core);
        actual_makespan = actual_makespan.max(actual);
        match schedule.completion(flow.id) {
            Some(c) if (c.time - actual).abs() <= TIME_TOL && c.core == core => {}
            Some(c) => violations.push(Violation::CompletionMismatch { flow: flow.id, recorded: c.time, actual }),
            None => violations.push(Violation::CompletionMismatch { flow: flow.id, recorded: f64::NAN, actual }),
        }
    }
    if (schedule.makespan - actual_makespan).abs() > TIME_TOL {
        violations.push(Violation::MakespanMismatch { recorded: schedule.makespan, actual: actual_makespan });
    }
    ScheduleReport { violations }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub makespan: f64,
    pub coflow_completions: Vec<f64>,
    pub ratio_lp: f64,
    pub ratio_lb: f64,
}

pub fn evaluate(schedule: &Schedule, lp_opt: f64, lb: f64) -> Result<Metrics, ScheduleError> {
    if !(lp_opt > 0.0) {
        return Err(ScheduleError::NonpositiveLp(lp_opt));
    }
    Ok(Metrics {
        makespan: schedule.makespan,
        coflow_completions: schedule.coflow_completions.clone(),
        ratio_lp: schedule.makespan / lp_opt,
        ratio_lb: schedule.makespan / lb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{Assigned, Choice};
    use proptest::prelude::*;

    fn map(instance: &CoflowInstance, picks: &[(usize, f64)], seed: Option<u64>) -> AssignmentMap {
        AssignmentMap {
            interval: false,
            entries: instance
                .flows()
                .iter()
                .zip(picks)
                .map(|(f, &(core, priority))| Assigned {
                    flow: f.id,
                    demand: f.demand,
                    choice: Choice { core, index: priority as usize },
                    priority,
                })
                .collect(),
            rng_seed: seed,
        }
    }

    #[test]
    fn aggregate_orders_by_priority() {
        // (1,1,k=1) d=2 and (1,1,k=2) d=1
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![2]], vec![vec![1]]]).unwrap();
        let a = map(&inst, &[(0, 0.0), (0, 1.0)], None);
        let loads = aggregate_per_core(&a, &inst, TieBreak::Canonical).unwrap();
        assert_eq!(loads[0].matrix.get(0, 0), 3);
        let keys: Vec<usize> = loads[0].queues.cell(0, 0).iter().map(|q| q.key.coflow).collect();
        assert_eq!(keys, vec![0, 1]);

        let flipped = map(&inst, &[(0, 1.0), (0, 0.0)], None);
        let loads = aggregate_per_core(&flipped, &inst, TieBreak::Canonical).unwrap();
        let keys: Vec<usize> = loads[0].queues.cell(0, 0).iter().map(|q| q.key.coflow).collect();
        assert_eq!(keys, vec![1, 0]);
    }

    #[test]
    fn aggregate_splits_cores() {
        let inst = CoflowInstance::from_rows(&[1.0, 1.0], &[vec![vec![2, 0], vec![0, 3]]]).unwrap();
        let a = map(&inst, &[(0, 0.0), (1, 0.0)], None);
        let loads = aggregate_per_core(&a, &inst, TieBreak::Canonical).unwrap();
        assert_eq!(loads[0].matrix.rows(), vec![vec![2, 0], vec![0, 0]]);
        assert_eq!(loads[1].matrix.rows(), vec![vec![0, 0], vec![0, 3]]);
    }

    #[test]
    fn equal_priority_uses_flow_order() {
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![1]], vec![vec![1]], vec![vec![1]]]).unwrap();
        let a = map(&inst, &[(0, 0.0), (0, 0.0), (0, 0.0)], None);
        let loads = aggregate_per_core(&a, &inst, TieBreak::Canonical).unwrap();
        let keys: Vec<usize> = loads[0].queues.cell(0, 0).iter().map(|q| q.key.coflow).collect();
        assert_eq!(keys, vec![0, 1, 2]);
        // seeded ties are reproducible and still a permutation
        let s1 = aggregate_per_core(&a, &inst, TieBreak::Seeded(9)).unwrap();
        let s2 = aggregate_per_core(&a, &inst, TieBreak::Seeded(9)).unwrap();
        let k1: Vec<usize> = s1[0].queues.cell(0, 0).iter().map(|q| q.key.coflow).collect();
        let k2: Vec<usize> = s2[0].queues.cell(0, 0).iter().map(|q| q.key.coflow).collect();
        assert_eq!(k1, k2);
        let mut sorted = k1.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn incomplete_assignment_rejected() {
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![1, 1], vec![0, 0]]]).unwrap();
        let a = map(&inst, &[(0, 0.0)], None);
        assert!(matches!(build_schedule(&a, &inst, TieBreak::Canonical), Err(ScheduleError::Incomplete { .. })));
        let bad = map(&inst, &[(0, 0.0), (3, 0.0)], None);
        assert!(matches!(build_schedule(&bad, &inst, TieBreak::Canonical), Err(ScheduleError::BadCore { .. })));
    }

    #[test]
    fn makespan_examples() {
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![1, 0], vec![0, 1]]]).unwrap();
        let s = build_schedule(&map(&inst, &[(0, 0.0), (0, 0.0)], None), &inst, TieBreak::Canonical).unwrap();
        assert_eq!(s.makespan, 1.0);

        let inst = CoflowInstance::from_rows(&[2.0], &[vec![vec![3, 1], vec![1, 0]]]).unwrap();
        let picks = vec![(0, 0.0); inst.flows().len()];
        let s = build_schedule(&map(&inst, &picks, None), &inst, TieBreak::Canonical).unwrap();
        assert_eq!(s.makespan, 2.0);

        // core 1: rho 3 at speed 1; core 2: rho 4 at speed 2
        let inst = CoflowInstance::from_rows(&[1.0, 2.0], &[vec![vec![3, 0], vec![0, 4]]]).unwrap();
        let s = build_schedule(&map(&inst, &[(0, 0.0), (1, 0.0)], None), &inst, TieBreak::Canonical).unwrap();
        assert_eq!(s.makespan, 3.0);
        assert_eq!(s.cores[1].finish_time(), 2.0);
        assert!(verify_schedule(&s, &inst).is_clean());
    }

    #[test]
    fn verify_catches_conflicts_and_missing_units() {
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![1, 1], vec![0, 0]]]).unwrap();
        let mut s = build_schedule(&map(&inst, &[(0, 0.0), (0, 0.0)], None), &inst, TieBreak::Canonical).unwrap();
        assert!(verify_schedule(&s, &inst).is_clean());

        let mut conflict = s.clone();
        let moved = conflict.cores[0].slots[1].pop().unwrap();
        conflict.cores[0].slots[0].push(moved);
        let report = verify_schedule(&conflict, &inst);
        assert!(report.violations.iter().any(|v| v.to_string().starts_with("input port conflict")));

        s.cores[0].slots[1].clear();
        let report = verify_schedule(&s, &inst);
        assert!(report.violations.iter().any(|v| v.to_string().starts_with("under-delivery")));
    }

    #[test]
    fn evaluate_ratios() {
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![3]]]).unwrap();
        let s = build_schedule(&map(&inst, &[(0, 0.0)], None), &inst, TieBreak::Canonical).unwrap();
        let m = evaluate(&s, 2.0, 3.0).unwrap();
        assert_eq!(m.makespan, 3.0);
        assert_eq!(m.ratio_lp, 1.5);
        assert_eq!(m.ratio_lb, 1.0);
        assert_eq!(evaluate(&s, 3.0, 3.0).unwrap().ratio_lp, 1.0);
        assert!(matches!(evaluate(&s, 0.0, 1.0), Err(ScheduleError::NonpositiveLp(_))));
    }

    #[test]
    fn json_is_one_based() {
        let inst = CoflowInstance::from_rows(&[1.0], &[vec![vec![0, 1], vec![0, 0]]]).unwrap();
        let s = build_schedule(&map(&inst, &[(0, 0.0)], None), &inst, TieBreak::Canonical).unwrap();
        let json = s.to_json();
        assert_eq!(json["cores"][0]["slots"][0][0], serde_json::json!([1, 2, 1]));
    }

    fn instance_strategy() -> impl Strategy<Value = (CoflowInstance, Vec<(usize, f64)>, u64)> {
        (1usize..=4, 1usize..=3, 1usize..=3).prop_flat_map(|(n, m, k)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u64..=4, n * n), k),
                proptest::collection::vec(prop_oneof![Just(1.0), Just(2.0), Just(3.0)], m),
                proptest::collection::vec((0..m, 0u32..4), n * n * k),
                any::<u64>(),
            )
                .prop_filter_map("needs a flow", move |(cells, speeds, picks, seed)| {
                    let coflows: Vec<Vec<Vec<u64>>> =
                        cells.iter().map(|c| c.chunks(n).map(|r| r.to_vec()).collect()).collect();
                    let inst = CoflowInstance::from_rows(&speeds, &coflows).ok()?;
                    let picks = picks[..inst.flows().len()].iter().map(|&(p, t)| (p, t as f64)).collect();
                    Some((inst, picks, seed))
                })
        })
    }

    proptest! {
        #[test]
        fn schedules_verify_and_match_load((inst, picks, seed) in instance_strategy(), seeded in any::<bool>()) {
            let a = map(&inst, &picks, seeded.then_some(seed));
            let tie = TieBreak::for_assignment(&a);
            let s = build_schedule(&a, &inst, tie).unwrap();
            let report = verify_schedule(&s, &inst);
            prop_assert!(report.is_clean(), "{:?}", report);
            let loads = aggregate_per_core(&a, &inst, tie).unwrap();
            let expected = loads
                .iter()
                .map(|l| rho(&l.matrix) as f64 / inst.speed(l.core))
                .fold(0.0, f64::max);
            prop_assert_eq!(s.makespan, expected);
            // cell queues drain in order
            for load in &loads {
                let core = &s.cores[load.core];
                for (i, j, _) in load.matrix.support() {
                    let queue = load.queues.cell(i, j);
                    for pair in queue.windows(2) {
                        let first_of_next = core.slots.iter().position(|slot| slot.iter().any(|u| u.flow == pair[1].key)).unwrap();
                        let last_of_prev = core.slots.iter().rposition(|slot| slot.iter().any(|u| u.flow == pair[0].key)).unwrap();
                        prop_assert!(last_of_prev < first_of_next);
                    }
                }
            }
        }
    }
}
