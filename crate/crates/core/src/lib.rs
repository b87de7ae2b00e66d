//! Collective cloud-configuration selection.
//!
//! A group of workloads shares one choice of VM type. [`micky`] finds that
//! exemplar with a budgeted multi-armed bandit search, [`baselines`] holds
//! the per-workload optimizers it is compared against, and [`evalharness`]
//! replicates runs over a [`PerfMatrix`] to measure search performance
//! against measurement cost.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod baselines;
pub mod error;
pub mod evalharness;
pub mod gp;
pub mod micky;
pub mod perfmatrix;
pub mod synth;

pub use bandit::{ArmStats, PolicySpec};
pub use error::{Error, Result};
pub use evalharness::{knee_point, replicate, Experiment, ExperimentReport, Knee, KneeInputs, MethodSpec};
pub use micky::{run_micky, Budget, MickyOutcome, RewardMode};
pub use perfmatrix::{load_matrix, CloudConfig, ObjectiveKind, PerfMatrix, Pull, PullLog};
pub use synth::{gen_matrix, SynthSpec};
