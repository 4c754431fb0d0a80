//! Makespan scheduling of coflows on heterogeneous parallel network cores.
//!
//! The pipeline is: build an LP relaxation ([`lp`]), turn its solution into a
//! whole-flow assignment of every flow to a (core, time index) pair by sampling
//! or by conditional-expectation greedy selection ([`assignment`]), then schedule
//! each core's aggregated demand with a Birkhoff-von Neumann decomposition
//! ([`bvn`], [`schedule`]). [`bench`] contains an instance generator, an
//! exhaustive oracle and the experiment runner behind the CLI.

pub mod assignment;
pub mod bench;
pub mod bvn;
pub mod lp;
pub mod matching;
pub mod model;
pub mod schedule;

pub use model::{CoflowInstance, DemandMatrix, Flow, FlowId, IntervalGrid};
