//! Birkhoff-von Neumann scheduling of a single aggregated coflow on one core.
//!
//! The demand matrix is first padded until every row and column sums to its
//! load `rho(D)`, then peeled into weighted permutation matchings. Expanding
//! the matchings into unit slots gives a conflict-free schedule of exactly
//! `rho(D)` slots.

use serde::Serialize;
use thiserror::Error;

use crate::matching::perfect_matching;
use crate::model::{rho, DemandMatrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BvnError {
    #[error("demand matrix is zero")]
    ZeroMatrix,
    #[error("matrix is not balanced: row/column sums differ from {0}")]
    NotBalanced(u64),
    #[error("no perfect matching on the residual support")]
    NoPerfectMatching,
    #[error("queue for cell ({0},{1}) carries {2} units but the matrix holds {3}")]
    QueueMismatch(usize, usize, u64, u64),
}

/// One permutation of the decomposition, used for `coefficient` consecutive slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BvnStep {
    pub coefficient: u64,
    /// `(input, output)` pairs, one per input port.
    pub matching: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BvnDecomposition {
    pub rho: u64,
    pub steps: Vec<BvnStep>,
}

impl BvnDecomposition {
    /// `sum_u q_u * Pi_u`.
    pub fn reconstruct(&self, n: usize) -> DemandMatrix {
        let mut m = DemandMatrix::zeros(n);
        for step in &self.steps {
            for &(i, j) in &step.matching {
                m.add(i, j, step.coefficient);
            }
        }
        m
    }

    pub fn total_slots(&self) -> u64 {
        self.steps.iter().map(|s| s.coefficient).sum()
    }
}

/// Pads `d` so that all row and column sums equal `rho(d)`.
///
/// Repeatedly picks the lightest row and the lightest column (smallest index on
/// ties) and adds to their crossing cell the smaller of the two deficits.
pub fn augment(d: &DemandMatrix) -> Result<DemandMatrix, BvnError> {
    let target = rho(d);
    if target == 0 {
        return Err(BvnError::ZeroMatrix);
    }
    let n = d.size();
    let mut out = d.clone();
    let mut rows = out.row_sums();
    let mut cols = out.col_sums();
    loop {
        let (i_star, &row_min) = argmin(&rows);
        let (j_star, &col_min) = argmin(&cols);
        if row_min.min(col_min) >= target {
            break;
        }
        let fill = (target - row_min).min(target - col_min);
        debug_assert!(fill > 0 && i_star < n && j_star < n);
        out.add(i_star, j_star, fill);
        rows[i_star] += fill;
        cols[j_star] += fill;
    }
    Ok(out)
}

fn argmin(v: &[u64]) -> (usize, &u64) {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty")
}

/// Decomposes a balanced matrix into weighted perfect matchings.
pub fn decompose(balanced: &DemandMatrix) -> Result<BvnDecomposition, BvnError> {
    let n = balanced.size();
    let target = rho(balanced);
    if target == 0 {
        return Err(BvnError::ZeroMatrix);
    }
    if balanced.row_sums().iter().chain(balanced.col_sums().iter()).any(|&s| s != target) {
        return Err(BvnError::NotBalanced(target));
    }
    let mut residual = balanced.clone();
    let mut steps = Vec::new();
    while !residual.is_zero() {
        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| residual.get(i, j) > 0).collect())
            .collect();
        let mate = perfect_matching(&adjacency, n).ok_or(BvnError::NoPerfectMatching)?;
        let matching: Vec<(usize, usize)> = mate.into_iter().enumerate().collect();
        let q = matching.iter().map(|&(i, j)| residual.get(i, j)).min().expect("n >= 1");
        for &(i, j) in &matching {
            residual.set(i, j, residual.get(i, j) - q);
        }
        steps.push(BvnStep { coefficient: q, matching });
    }
    Ok(BvnDecomposition { rho: target, steps })
}

/// A flow waiting in one cell of the aggregated matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueuedFlow<K> {
    pub key: K,
    pub units: u64,
}

/// Per-cell ordered flow queues for an `n x n` aggregated matrix.
#[derive(Clone, Debug)]
pub struct CellQueues<K> {
    n: usize,
    cells: Vec<Vec<QueuedFlow<K>>>,
}

impl<K: Copy> CellQueues<K> {
    pub fn new(n: usize) -> Self {
        CellQueues { n, cells: vec![Vec::new(); n * n] }
    }

    pub fn push(&mut self, i: usize, j: usize, key: K, units: u64) {
        self.cells[i * self.n + j].push(QueuedFlow { key, units });
    }

    pub fn cell(&self, i: usize, j: usize) -> &[QueuedFlow<K>] {
        &self.cells[i * self.n + j]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut Vec<QueuedFlow<K>> {
        &mut self.cells[i * self.n + j]
    }

    /// Matrix of summed queue demands.
    pub fn matrix(&self) -> DemandMatrix {
        let mut m = DemandMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.cell(i, j).iter().map(|q| q.units).sum());
            }
        }
        m
    }
}

/// A real data unit sent in one slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SlotUnit<K> {
    pub input: usize,
    pub output: usize,
    pub flow: K,
}

#[derive(Clone, Debug)]
pub struct SlotSchedule<K> {
    /// `slots[w]` lists the real units sent in slot `w + 1`; padding units are omitted.
    pub slots: Vec<Vec<SlotUnit<K>>>,
    /// `(flow, 1-based slot of its last unit)` in order of completion.
    pub completions: Vec<(K, u64)>,
    pub decomposition: BvnDecomposition,
}

impl<K> SlotSchedule<K> {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Schedules `d` in `rho(d)` unit slots, draining each cell's queue in order.
///
/// A zero matrix yields an empty schedule.
pub fn schedule_aggregated<K: Copy>(
    d: &DemandMatrix,
    queues: &CellQueues<K>,
) -> Result<SlotSchedule<K>, BvnError> {
    let n = d.size();
    for i in 0..n {
        for j in 0..n {
            let queued: u64 = queues.cell(i, j).iter().map(|q| q.units).sum();
            if queued != d.get(i, j) {
                return Err(BvnError::QueueMismatch(i, j, queued, d.get(i, j)));
            }
        }
    }
    if d.is_zero() {
        return Ok(SlotSchedule {
            slots: Vec::new(),
            completions: Vec::new(),
            decomposition: BvnDecomposition { rho: 0, steps: Vec::new() },
        });
    }
    let decomposition = decompose(&augment(d)?)?;

    // cursor per cell: (position in queue, units already sent of that flow)
    let mut cursor = vec![(0usize, 0u64); n * n];
    let mut slots = Vec::with_capacity(decomposition.rho as usize);
    let mut completions = Vec::new();
    for step in &decomposition.steps {
        for _ in 0..step.coefficient {
            let slot_number = slots.len() as u64 + 1;
            let mut units = Vec::new();
            for &(i, j) in &step.matching {
                let queue = queues.cell(i, j);
                let (pos, sent) = &mut cursor[i * n + j];
                if *pos >= queue.len() {
                    continue;
                }
                let head = queue[*pos];
                units.push(SlotUnit { input: i, output: j, flow: head.key });
                *sent += 1;
                if *sent == head.units {
                    completions.push((head.key, slot_number));
                    *pos += 1;
                    *sent = 0;
                }
            }
            slots.push(units);
        }
    }
    Ok(SlotSchedule { slots, completions, decomposition })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[u64]]) -> DemandMatrix {
        DemandMatrix::from_rows(rows).unwrap()
    }

    fn single_queues(d: &DemandMatrix) -> CellQueues<(usize, usize)> {
        let mut q = CellQueues::new(d.size());
        for (i, j, v) in d.support() {
            q.push(i, j, (i, j), v);
        }
        q
    }

    #[test]
    fn augment_examples() {
        assert_eq!(augment(&m(&[&[2, 1], &[0, 3]])).unwrap(), m(&[&[3, 1], &[1, 3]]));
        assert_eq!(augment(&m(&[&[1, 0], &[0, 1]])).unwrap(), m(&[&[1, 0], &[0, 1]]));
        assert_eq!(augment(&m(&[&[0, 2], &[0, 0]])).unwrap(), m(&[&[0, 2], &[2, 0]]));
        assert_eq!(augment(&DemandMatrix::zeros(2)), Err(BvnError::ZeroMatrix));
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(&m(&[&[3, 1], &[1, 3]])).unwrap();
        assert_eq!(
            d.steps,
            vec![
                BvnStep { coefficient: 3, matching: vec![(0, 0), (1, 1)] },
                BvnStep { coefficient: 1, matching: vec![(0, 1), (1, 0)] },
            ]
        );
        assert_eq!(d.total_slots(), 4);

        let id = decompose(&m(&[&[1, 0], &[0, 1]])).unwrap();
        assert_eq!(id.steps, vec![BvnStep { coefficient: 1, matching: vec![(0, 0), (1, 1)] }]);

        let two = decompose(&m(&[&[2, 0], &[0, 2]])).unwrap();
        assert_eq!(two.steps, vec![BvnStep { coefficient: 2, matching: vec![(0, 0), (1, 1)] }]);
    }

    #[test]
    fn decompose_rejects_unbalanced() {
        assert_eq!(decompose(&m(&[&[2, 1], &[0, 3]])), Err(BvnError::NotBalanced(4)));
    }

    #[test]
    fn schedule_examples() {
        let d = m(&[&[1, 0], &[0, 1]]);
        let s = schedule_aggregated(&d, &single_queues(&d)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.slots[0].len(), 2);
        assert!(s.completions.iter().all(|&(_, w)| w == 1));

        let d = m(&[&[2, 1], &[1, 2]]);
        let s = schedule_aggregated(&d, &single_queues(&d)).unwrap();
        assert_eq!(s.len(), 3);

        let d = m(&[&[2]]);
        let mut q = CellQueues::new(1);
        q.push(0, 0, 'A', 1);
        q.push(0, 0, 'B', 1);
        let s = schedule_aggregated(&d, &q).unwrap();
        assert_eq!(s.completions, vec![('A', 1), ('B', 2)]);
    }

    #[test]
    fn schedule_rejects_queue_mismatch() {
        let d = m(&[&[2]]);
        let mut q = CellQueues::new(1);
        q.push(0, 0, 0, 1);
        assert_eq!(schedule_aggregated(&d, &q).unwrap_err(), BvnError::QueueMismatch(0, 0, 1, 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = DemandMatrix> {
            (1usize..=6).prop_flat_map(|n| {
                proptest::collection::vec(0u64..=9, n * n)
                    .prop_map(move |v| DemandMatrix::from_rows(&v.chunks(n).collect::<Vec<_>>()).unwrap())
            })
        }

        proptest! {
            #[test]
            fn augment_balances_and_dominates(d in matrix()) {
                prop_assume!(!d.is_zero());
                let a = augment(&d).unwrap();
                let r = rho(&d);
                prop_assert!(a.row_sums().iter().all(|&s| s == r));
                prop_assert!(a.col_sums().iter().all(|&s| s == r));
                for i in 0..d.size() {
                    for j in 0..d.size() {
                        prop_assert!(a.get(i, j) >= d.get(i, j));
                    }
                }
                prop_assert_eq!(augment(&a).unwrap(), a);
            }

            #[test]
            fn decomposition_reconstructs(d in matrix()) {
                prop_assume!(!d.is_zero());
                let a = augment(&d).unwrap();
                let dec = decompose(&a).unwrap();
                let n = d.size();
                prop_assert_eq!(dec.reconstruct(n), a);
                prop_assert_eq!(dec.total_slots(), rho(&d));
                prop_assert!(dec.steps.len() + 2 * n <= n * n + 2);
                prop_assert!(dec.steps.iter().all(|s| s.coefficient > 0));
            }

            #[test]
            fn schedule_is_exact_and_conflict_free(d in matrix()) {
                let q = single_queues(&d);
                let s = schedule_aggregated(&d, &q).unwrap();
                prop_assert_eq!(s.len() as u64, rho(&d));
                let n = d.size();
                let mut delivered = DemandMatrix::zeros(n);
                for slot in &s.slots {
                    let mut ins = vec![false; n];
                    let mut outs = vec![false; n];
                    for u in slot {
                        prop_assert!(!ins[u.input] && !outs[u.output]);
                        ins[u.input] = true;
                        outs[u.output] = true;
                        delivered.add(u.input, u.output, 1);
                    }
                }
                prop_assert_eq!(delivered, d);
            }
        }
    }
}
