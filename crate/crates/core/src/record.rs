//! Per-trial records shared by the finite and infinite processes.

use serde::{Deserialize, Serialize};

use crate::rewards::{RewardVector, StreamChecksum};

/// State after one step, kept when trajectory recording is enabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSnapshot {
    pub t: usize,
    /// Stage-one counts (finite process only).
    pub s: Option<Vec<u64>>,
    /// Adopter counts (finite process only).
    pub d: Option<Vec<u64>>,
    /// Popularity after the step (`Q^t` or `P^t`).
    pub q: Vec<f64>,
    pub r: RewardVector,
    pub group_reward: f64,
}

/// Log-potential bookkeeping of the infinite process after step `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialPoint {
    pub t: usize,
    pub log_phi: f64,
    pub cum_opt_reward: f64,
    pub cum_group_reward: f64,
}

/// Everything a single trial produces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// `g_t = sum_j popularity_j^{t-1} R_j^t` for `t = 1..=T`.
    pub group_rewards: Vec<f64>,
    /// Popularity of the best option before each step, `popularity_1^{t-1}`.
    pub leader_share: Vec<f64>,
    /// Fraction of all individuals (sit-outs included) that adopted a good
    /// option. Diagnostic only; equals `group_rewards` for the infinite process.
    pub per_capita_rewards: Vec<f64>,
    /// Smallest option popularity after each step.
    pub min_share: Vec<f64>,
    pub degenerate_resets: usize,
    pub reward_checksum: StreamChecksum,
    pub trajectory: Vec<StepSnapshot>,
    /// Starts with the `t = 0` point. Empty for the finite process.
    pub potential: Vec<PotentialPoint>,
}

impl TrialRecord {
    pub fn steps(&self) -> usize {
        self.group_rewards.len()
    }

    /// `eta_1 - (1/T) sum_t g_t` for this realization.
    pub fn realized_regret(&self, eta_best: f64) -> f64 {
        self.realized_regret_window(eta_best, 0, self.steps())
    }

    /// Regret restricted to steps `from+1 ..= to`.
    pub fn realized_regret_window(&self, eta_best: f64, from: usize, to: usize) -> f64 {
        let w = &self.group_rewards[from..to];
        if w.is_empty() {
            return 0.0;
        }
        eta_best - w.iter().sum::<f64>() / w.len() as f64
    }

    pub fn mean_leader_share(&self) -> f64 {
        if self.leader_share.is_empty() {
            return 0.0;
        }
        self.leader_share.iter().sum::<f64>() / self.leader_share.len() as f64
    }

    /// Steps whose post-step minimum popularity is below `floor`.
    pub fn floor_violations(&self, floor: f64) -> usize {
        self.min_share.iter().filter(|&&x| x < floor).count()
    }
}

/// Which snapshots to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Recording {
    #[default]
    Summary,
    /// Every `k`-th step (and always the last one).
    Every(usize),
}

impl Recording {
    pub(crate) fn keep(&self, t: usize, t_max: usize) -> bool {
        match *self {
            Recording::Summary => false,
            Recording::Every(k) => t == t_max || (k > 0 && t.is_multiple_of(k)),
        }
    }
}
