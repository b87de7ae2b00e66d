//! Collective optimizer: a two-phase budgeted bandit search over the shared
//! set of VM types that returns one exemplar configuration for a whole group
//! of workloads.
//!
//! Phase 1 sweeps every arm `alpha` times, pairing each pull with a random
//! workload. Phase 2 spends `ceil(beta * |W|)` pulls, taking workloads from a
//! seeded permutation and letting the bandit policy pick the arm.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{self, ArmStats, PolicySpec};
use crate::error::{invalid, Error, Result};
use crate::perfmatrix::{PerfMatrix, Pull, PullDoc, PullLog};

/// Measurement budget: `alpha` full sweeps plus `beta` pulls per workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub alpha: u32,
    pub beta: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { alpha: 1, beta: 0.5 }
    }
}

impl Budget {
    pub fn new(alpha: u32, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid(format!("beta must be a finite non-negative number, got {beta}")));
        }
        Ok(Budget { alpha, beta })
    }

    pub fn exploration_pulls(&self, n_configs: usize) -> u64 {
        u64::from(self.alpha) * n_configs as u64
    }

    /// `ceil(beta * |W|)`. Products within 1e-9 of an integer are not rounded up.
    pub fn exploitation_pulls(&self, n_workloads: usize) -> u64 {
        (self.beta * n_workloads as f64 - 1e-9).ceil().max(0.0) as u64
    }

    pub fn total_cost(&self, n_configs: usize, n_workloads: usize) -> u64 {
        self.exploration_pulls(n_configs) + self.exploitation_pulls(n_workloads)
    }
}

/// How a pull's reward is normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Against the best value seen so far for the same workload.
    Online,
    /// Against the true per-workload optimum taken from the full matrix.
    #[default]
    Oracle,
}

/// Ratio of the normalizer to the observed objective, in (0, 1].
pub fn reward(observed: f64, best_observed_for_w: f64) -> Result<f64> {
    if !(observed > 0.0 && best_observed_for_w > 0.0) {
        return Err(invalid(format!(
            "reward inputs must be positive, got observed={observed}, best={best_observed_for_w}"
        )));
    }
    Ok((best_observed_for_w / observed).min(1.0))
}

/// Highest mean reward among pulled arms, lowest index on ties.
pub fn exemplar_of(arms: &[ArmStats]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in arms.iter().enumerate() {
        if let Some(m) = a.mean() {
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((i, m));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoPulledArm)
}

/// Without-replacement workload draws, reshuffled whenever exhausted.
struct WorkloadCycle {
    order: Vec<usize>,
    next: usize,
}

impl WorkloadCycle {
    fn new(n: usize) -> Self {
        WorkloadCycle { order: (0..n).collect(), next: n }
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.next == self.order.len() {
            self.order.shuffle(rng);
            self.next = 0;
        }
        self.next += 1;
        self.order[self.next - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MickyOutcome {
    pub exemplar: usize,
    pub pull_log: PullLog,
    pub arm_stats: Vec<ArmStats>,
}

impl MickyOutcome {
    pub fn cost(&self) -> u64 {
        self.pull_log.cost()
    }

    pub fn to_doc(&self, matrix: &PerfMatrix) -> OutcomeDoc {
        OutcomeDoc {
            method: None,
            workload: None,
            exemplar: matrix.configs()[self.exemplar].id.clone(),
            cost: self.cost(),
            pull_log: self.pull_log.to_doc(matrix),
            arm_stats: Some(
                self.arm_stats
                    .iter()
                    .zip(matrix.configs())
                    .map(|(a, c)| ArmDoc { config: c.id.clone(), pulls: a.pulls, mean_reward: a.mean() })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDoc {
    pub config: String,
    pub pulls: u64,
    pub mean_reward: Option<f64>,
}

/// JSON form of an optimizer run. Collective runs fill `arm_stats`;
/// per-workload runs fill `method` and `workload`, with `exemplar` holding
/// the config chosen for that workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
    pub exemplar: String,
    pub cost: u64,
    pub pull_log: Vec<PullDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_stats: Option<Vec<ArmDoc>>,
}

/// Runs the collective optimizer over every workload in `matrix`.
pub fn run_micky<R: Rng + ?Sized>(
    matrix: &PerfMatrix,
    policy: PolicySpec,
    budget: Budget,
    reward_mode: RewardMode,
    rng: &mut R,
) -> Result<MickyOutcome> {
    policy.validate()?;
    let n_s = matrix.n_configs();
    let n_w = matrix.n_workloads();
    if budget.total_cost(n_s, n_w) == 0 {
        return Err(Error::EmptyBudget);
    }

    let mut arms = vec![ArmStats::default(); n_s];
    let mut log = PullLog::new();
    let mut best_seen = vec![f64::INFINITY; n_w];

    let mut pull = |w: usize, s: usize, arms: &mut [ArmStats], log: &mut PullLog| -> Result<()> {
        let value = matrix.objective_at(w, s);
        let normalizer = match reward_mode {
            RewardMode::Online => {
                best_seen[w] = best_seen[w].min(value);
                best_seen[w]
            }
            RewardMode::Oracle => matrix.optimum_at(w),
        };
        let r = reward(value, normalizer)?;
        bandit::update(arms, s, r)?;
        log.push(Pull { workload: w, config: s, value, reward: Some(r) });
        Ok(())
    };

    for _ in 0..budget.alpha {
        let mut cycle = WorkloadCycle::new(n_w);
        for s in 0..n_s {
            let w = cycle.draw(rng);
            pull(w, s, &mut arms, &mut log)?;
        }
    }

    let mut cycle = WorkloadCycle::new(n_w);
    for _ in 0..budget.exploitation_pulls(n_w) {
        let w = cycle.draw(rng);
        let s = policy.select(&arms, rng);
        pull(w, s, &mut arms, &mut log)?;
    }

    let exemplar = exemplar_of(&arms)?;
    Ok(MickyOutcome { exemplar, pull_log: log, arm_stats: arms })
}
