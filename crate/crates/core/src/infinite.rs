//! Infinite-population limit: a multiplicative-weights update with
//! stochastic rewards and uniform mixing.
//!
//! The raw weights follow
//! `W_j' = ((1 - mu) W_j + (mu / m) sum_k W_k) * beta^R_j * alpha^(1 - R_j)`
//! and decay geometrically, so they are never stored. Instead the
//! normalized distribution `P` is updated directly and the log of the total
//! weight `Phi = sum_k W_k` is accumulated separately, starting from
//! `Phi^0 = m`. With `alpha = 1 - beta` the reward factor is
//! `(1 - beta) e^(delta R_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::sampling_probs;
use crate::params::ModelParams;
use crate::record::{PotentialPoint, Recording, StepSnapshot, TrialRecord};
use crate::rewards::{RewardStream, RewardVector, StreamChecksum};

/// Normalized weights plus the potential bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDist {
    p: Vec<f64>,
    log_phi: f64,
    cum_opt_reward: f64,
    cum_group_reward: f64,
    t: usize,
}

impl WeightDist {
    pub fn uniform(m: usize) -> Self {
        Self {
            p: vec![1.0 / m as f64; m],
            log_phi: (m as f64).ln(),
            cum_opt_reward: 0.0,
            cum_group_reward: 0.0,
            t: 0,
        }
    }

    /// Arbitrary starting distribution; the total weight is still `m`.
    pub fn from_distribution(p: Vec<f64>) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if p.len() < 2 || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParams(format!("not a distribution: {p:?}")));
        }
        let m = p.len();
        Ok(Self {
            p: p.iter().map(|x| x / sum).collect(),
            ..Self::uniform(m)
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn log_phi(&self) -> f64 {
        self.log_phi
    }

    pub fn cum_opt_reward(&self) -> f64 {
        self.cum_opt_reward
    }

    pub fn cum_group_reward(&self) -> f64 {
        self.cum_group_reward
    }

    pub fn t(&self) -> usize {
        self.t
    }

    fn potential_point(&self) -> PotentialPoint {
        PotentialPoint {
            t: self.t,
            log_phi: self.log_phi,
            cum_opt_reward: self.cum_opt_reward,
            cum_group_reward: self.cum_group_reward,
        }
    }
}

/// One update; returns `sum_j P_j^{t-1} R_j^t`.
pub fn step_infinite(dist: &mut WeightDist, rewards: &RewardVector, params: &ModelParams) -> f64 {
    let group = rewards.dot(&dist.p);
    let mut next = sampling_probs(&dist.p, params.mu());
    for (j, x) in next.iter_mut().enumerate() {
        *x *= params.adoption_prob(rewards.get(j));
    }
    let total: f64 = next.iter().sum();
    if total > 0.0 {
        let inv = 1.0 / total;
        next.iter_mut().for_each(|x| *x *= inv);
        // absorb the rounding residue so the sum stays at 1 over long runs
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
    } else {
        // alpha = 0 and no good signal: all weight vanishes
        let m = next.len() as f64;
        next.iter_mut().for_each(|x| *x = 1.0 / m);
    }
    dist.p = next;
    dist.log_phi += total.ln();
    dist.cum_opt_reward += rewards.value(0);
    dist.cum_group_reward += group;
    dist.t += 1;
    group
}

/// Smallest probability any option can have after one update from any
/// distribution: the option had no weight, drew a bad signal, and every
/// other option drew a good one. Equals
/// `mu alpha / (m beta - mu beta + mu alpha)`.
pub fn popularity_floor_after_step(params: &ModelParams) -> f64 {
    let (mu, a, b) = (params.mu(), params.alpha(), params.beta());
    let m = params.m() as f64;
    mu * a / (m * b - mu * b + mu * a)
}

/// Runs `t_max` updates from `p0`.
pub fn run_infinite(
    p0: WeightDist,
    stream: &mut RewardStream,
    params: &ModelParams,
    t_max: usize,
    recording: Recording,
) -> Result<TrialRecord> {
    let mut dist = p0;
    if dist.p.len() != params.m() {
        return Err(Error::InvalidParams(format!(
            "distribution has {} options, params have {}",
            dist.p.len(),
            params.m()
        )));
    }
    let mut record = TrialRecord {
        reward_checksum: StreamChecksum::default(),
        ..Default::default()
    };
    record.potential.push(dist.potential_point());
    let t_end = dist.t + t_max;
    for _ in 0..t_max {
        let r = stream.next_rewards(params)?;
        let lead = dist.p[0];
        let g = step_infinite(&mut dist, &r, params);
        record.group_rewards.push(g);
        record.per_capita_rewards.push(g);
        record.leader_share.push(lead);
        record
            .min_share
            .push(dist.p.iter().copied().fold(f64::INFINITY, f64::min));
        record.reward_checksum.update(&r);
        record.potential.push(dist.potential_point());
        if recording.keep(dist.t, t_end) {
            record.trajectory.push(StepSnapshot {
                t: dist.t,
                s: None,
                d: None,
                q: dist.p.clone(),
                r,
                group_reward: g,
            });
        }
    }
    Ok(record)
}

/// Lower and upper log-potential envelopes at one prefix length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditLine {
    pub prefix: usize,
    /// `log_phi - lower`.
    pub lower_slack: f64,
    /// `upper - log_phi`.
    pub upper_slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialAudit {
    pub lines: Vec<AuditLine>,
    /// `(1 - mu)(e^d - 1) / (1 + mu d)` with `d = ln(beta / alpha)`.
    pub delta_prime: f64,
    pub applicable: bool,
    pub note: Option<String>,
}

impl PotentialAudit {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn violations(&self) -> impl Iterator<Item = &AuditLine> {
        self.lines.iter().filter(|l| !l.pass)
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.violations().next().map(|l| l.prefix)
    }
}

const AUDIT_TOL: f64 = 1e-9;

/// `(1 - mu)(e^d - 1) / (1 + mu d)`.
pub fn delta_prime(mu: f64, d: f64) -> f64 {
    (1.0 - mu) * d.exp_m1() / (1.0 + mu * d)
}

/// Checks, for every prefix `T'` of an infinite-process trial,
///
/// ```text
/// T' ln a + T' ln(1-mu) + d sum R_1 + ln(m P_1^0)
///     <= ln Phi^T'
///     <= T' ln a + T' ln(1 + mu(e^d - 1)) + ln m + d' sum_t sum_j P_j^{t-1} R_j^t
/// ```
///
/// with `a = alpha` and `d = ln(beta / alpha)`; for `alpha = 1 - beta` this
/// is `d = delta`. The `ln(m P_1^0)` term vanishes for the uniform start
/// (in general it is `ln W_1` at the first recorded point).
pub fn audit_potential(trial: &TrialRecord, params: &ModelParams) -> PotentialAudit {
    let mu = params.mu();
    let a = params.alpha();
    let d = params.adoption_log_ratio();
    let m = params.m() as f64;
    let dp = delta_prime(mu, d);
    let not_applicable = |note: &str| PotentialAudit {
        lines: Vec::new(),
        delta_prime: dp,
        applicable: false,
        note: Some(note.to_string()),
    };
    if a <= 0.0 {
        return not_applicable("alpha = 0: potential collapses to zero");
    }
    if trial.potential.is_empty() || trial.leader_share.len() + 1 != trial.potential.len() {
        return not_applicable("trial has no potential record");
    }
    let p1_0 = trial.leader_share.first().copied().unwrap_or(1.0 / m);
    let start = trial.potential[0];
    let ln_a = a.ln();
    let ln_stay = (1.0 - mu).ln();
    let ln_mix = (mu * d.exp_m1()).ln_1p();
    let lines = trial.potential[1..]
        .iter()
        .map(|pt| {
            let k = (pt.t - start.t) as f64;
            let opt = pt.cum_opt_reward - start.cum_opt_reward;
            let grp = pt.cum_group_reward - start.cum_group_reward;
            let lower = k * ln_a + k * ln_stay + d * opt + start.log_phi + p1_0.ln();
            let upper = k * ln_a + k * ln_mix + start.log_phi + dp * grp;
            let lower_slack = pt.log_phi - lower;
            let upper_slack = upper - pt.log_phi;
            let tol = AUDIT_TOL * pt.log_phi.abs().max(1.0);
            AuditLine {
                prefix: pt.t - start.t,
                lower_slack,
                upper_slack,
                pass: lower_slack >= -tol && upper_slack >= -tol,
            }
        })
        .collect();
    PotentialAudit {
        lines,
        delta_prime: dp,
        applicable: true,
        note: None,
    }
}
