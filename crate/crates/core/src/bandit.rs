//! Arm bookkeeping and the three selection heuristics: epsilon-greedy,
//! softmax and UCB1.
//!
//! Every policy applies the same bootstrap rule: an arm that has never been
//! pulled is chosen first, lowest index first, before any formula is
//! evaluated. Ties are always broken toward the lowest index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub pulls: u64,
    pub reward_sum: f64,
}

impl ArmStats {
    /// Mean reward, `None` until the arm has been pulled.
    pub fn mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.reward_sum / self.pulls as f64)
    }
}

/// Records one pull of `arm` with a reward in [0, 1].
pub fn update(arms: &mut [ArmStats], arm: usize, reward: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&reward) {
        return Err(invalid(format!("reward must lie in [0, 1], got {reward}")));
    }
    let stats = arms.get_mut(arm).ok_or_else(|| invalid(format!("arm index {arm} out of range")))?;
    stats.pulls += 1;
    stats.reward_sum += reward;
    Ok(())
}

pub fn total_pulls(arms: &[ArmStats]) -> u64 {
    arms.iter().map(|a| a.pulls).sum()
}

fn first_unpulled(arms: &[ArmStats]) -> Option<usize> {
    arms.iter().position(|a| a.pulls == 0)
}

fn argmax_by(arms: &[ArmStats], score: impl Fn(&ArmStats) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, a) in arms.iter().enumerate() {
        let s = score(a);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Highest-mean arm, lowest index on ties. Arms are assumed pulled.
pub fn greedy_arm(arms: &[ArmStats]) -> usize {
    argmax_by(arms, |a| a.mean().unwrap_or(f64::NEG_INFINITY))
}

pub fn select_epsilon_greedy<R: Rng + ?Sized>(arms: &[ArmStats], epsilon: f64, rng: &mut R) -> usize {
    if let Some(i) = first_unpulled(arms) {
        return i;
    }
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..arms.len())
    } else {
        greedy_arm(arms)
    }
}

/// Boltzmann probabilities over arm means at temperature `temperature`.
pub fn softmax_probabilities(arms: &[ArmStats], temperature: f64) -> Vec<f64> {
    let means: Vec<f64> = arms.iter().map(|a| a.mean().unwrap_or(0.0)).collect();
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = means.iter().map(|m| ((m - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

pub fn select_softmax<R: Rng + ?Sized>(arms: &[ArmStats], temperature: f64, rng: &mut R) -> usize {
    if let Some(i) = first_unpulled(arms) {
        return i;
    }
    let probs = softmax_probabilities(arms, temperature);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Round-off left u above the accumulated mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// UCB1 score: mean + sqrt(2 ln t / n).
pub fn ucb1_score(stats: &ArmStats, total_pulls: u64) -> f64 {
    let n = stats.pulls as f64;
    stats.reward_sum / n + (2.0 * (total_pulls as f64).ln() / n).sqrt()
}

pub fn select_ucb1(arms: &[ArmStats], total_pulls: u64) -> usize {
    if let Some(i) = first_unpulled(arms) {
        return i;
    }
    argmax_by(arms, |a| ucb1_score(a, total_pulls))
}

/// Bandit policy together with its single parameter, if any.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    EpsilonGreedy {
        epsilon: f64,
    },
    Softmax {
        temperature: f64,
    },
    #[default]
    Ucb1,
}

impl PolicySpec {
    pub fn epsilon_greedy(epsilon: f64) -> Result<Self> {
        let p = PolicySpec::EpsilonGreedy { epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn softmax(temperature: f64) -> Result<Self> {
        let p = PolicySpec::Softmax { temperature };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::EpsilonGreedy { epsilon } if !(0.0..=1.0).contains(&epsilon) => {
                Err(invalid(format!("epsilon must lie in [0, 1], got {epsilon}")))
            }
            PolicySpec::Softmax { temperature } if !(temperature > 0.0) => {
                Err(invalid(format!("temperature must be > 0, got {temperature}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::EpsilonGreedy { .. } => "epsilon-greedy",
            PolicySpec::Softmax { .. } => "softmax",
            PolicySpec::Ucb1 => "ucb1",
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, arms: &[ArmStats], rng: &mut R) -> usize {
        match *self {
            PolicySpec::EpsilonGreedy { epsilon } => select_epsilon_greedy(arms, epsilon, rng),
            PolicySpec::Softmax { temperature } => select_softmax(arms, temperature, rng),
            PolicySpec::Ucb1 => select_ucb1(arms, total_pulls(arms)),
        }
    }
}
