//! The N-individual two-stage process.
//!
//! Each step every individual first picks an option to consider (uniformly
//! with probability `mu`, otherwise proportionally to the current adopter
//! popularity `Q^t`), then adopts it with probability `beta` if the option's
//! signal is good and `alpha` otherwise. Non-adopters sit the step out.
//!
//! Two engines share this law: [`FinitePopState`] draws aggregate counts
//! (conditional binomials, `O(m)` per step regardless of `N`), and
//! [`AgentPopulation`] simulates every individual literally.
//!
//! When a step produces no adopters at all the popularity is reset to
//! uniform, the same convention as the initial state, and the event is
//! counted in `degenerate_resets`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::record::{Recording, StepSnapshot, TrialRecord};
use crate::rewards::{RewardStream, RewardVector, StreamChecksum};

/// Aggregate state of the finite population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitePopState {
    n: u64,
    d: Vec<u64>,
    s: Vec<u64>,
    q: Vec<f64>,
    t: usize,
    degenerate_resets: usize,
}

/// What one step produced, besides the new state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// `sum_j Q_j^{t-1} R_j^t`.
    pub group_reward: f64,
    /// `Q_1^{t-1}`.
    pub prev_leader_share: f64,
    /// Adopters of good options over `N`.
    pub per_capita_reward: f64,
    pub degenerate: bool,
}

impl FinitePopState {
    /// `n` individuals, no adopters yet, uniform popularity.
    pub fn uniform(n: u64, m: usize) -> Self {
        Self {
            n,
            d: vec![0; m],
            s: vec![0; m],
            q: vec![1.0 / m as f64; m],
            t: 0,
            degenerate_resets: 0,
        }
    }

    /// Starts from an arbitrary popularity vector (no adopter counts yet).
    pub fn with_popularity(n: u64, q: Vec<f64>) -> Result<Self> {
        check_distribution(&q)?;
        let m = q.len();
        Ok(Self {
            q,
            ..Self::uniform(n, m)
        })
    }

    /// Starts from explicit adopter counts.
    pub fn with_counts(n: u64, d: Vec<u64>) -> Result<Self> {
        let total: u64 = d.iter().sum();
        if total > n {
            return Err(Error::InvalidParams(format!(
                "{total} adopters exceed population {n}"
            )));
        }
        let m = d.len();
        let mut state = Self::uniform(n, m);
        if total > 0 {
            state.q = d.iter().map(|&x| x as f64 / total as f64).collect();
        }
        state.d = d;
        Ok(state)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    pub fn adopters(&self) -> &[u64] {
        &self.d
    }

    pub fn samplers(&self) -> &[u64] {
        &self.s
    }

    pub fn popularity(&self) -> &[f64] {
        &self.q
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn degenerate_resets(&self) -> usize {
        self.degenerate_resets
    }

    /// Installs the counts of a finished step and returns its accounting.
    fn commit(&mut self, s: Vec<u64>, d: Vec<u64>, rewards: &RewardVector) -> StepOutcome {
        let group_reward = rewards.dot(&self.q);
        let prev_leader_share = self.q[0];
        let good_adopters: u64 = d
            .iter()
            .zip(rewards.bits())
            .filter(|(_, &r)| r)
            .map(|(x, _)| *x)
            .sum();
        let total: u64 = d.iter().sum();
        let degenerate = total == 0;
        if degenerate {
            let m = self.m();
            self.q.iter_mut().for_each(|x| *x = 1.0 / m as f64);
            self.degenerate_resets += 1;
        } else {
            let inv = 1.0 / total as f64;
            for (q, &x) in self.q.iter_mut().zip(&d) {
                *q = x as f64 * inv;
            }
        }
        self.s = s;
        self.d = d;
        self.t += 1;
        StepOutcome {
            group_reward,
            prev_leader_share,
            per_capita_reward: if self.n == 0 {
                0.0
            } else {
                good_adopters as f64 / self.n as f64
            },
            degenerate,
        }
    }
}

fn check_distribution(q: &[f64]) -> Result<()> {
    if q.len() < 2 || q.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidParams(format!("not a distribution: {q:?}")));
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!(
            "distribution sums to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Stage-one law: `(1 - mu) q_j + mu / m`.
pub fn sampling_probs(q: &[f64], mu: f64) -> Vec<f64> {
    let m = q.len() as f64;
    q.iter().map(|&x| (1.0 - mu) * x + mu / m).collect()
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("p checked to lie in (0, 1)")
        .sample(rng)
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let m = probs.len();
    let mut tail = vec![0.0; m + 1];
    for j in (0..m).rev() {
        tail[j] = tail[j + 1] + probs[j];
    }
    let mut out = vec![0; m];
    let mut remaining = n;
    for j in 0..m.saturating_sub(1) {
        if remaining == 0 {
            break;
        }
        let p = if tail[j] > 0.0 { probs[j] / tail[j] } else { 1.0 };
        let x = binomial(rng, remaining, p);
        out[j] = x;
        remaining -= x;
    }
    if m > 0 {
        out[m - 1] += remaining;
    }
    out
}

/// Stage one in count mode: how many individuals consider each option.
pub fn sample_stage<R: Rng + ?Sized>(
    state: &FinitePopState,
    params: &ModelParams,
    rng: &mut R,
) -> Vec<u64> {
    multinomial(rng, state.n, &sampling_probs(&state.q, params.mu()))
}

/// Stage two in count mode: `D_j ~ Binomial(S_j, beta or alpha)`.
pub fn adopt_stage<R: Rng + ?Sized>(
    s: &[u64],
    rewards: &RewardVector,
    params: &ModelParams,
    rng: &mut R,
) -> Vec<u64> {
    s.iter()
        .enumerate()
        .map(|(j, &sj)| binomial(rng, sj, params.adoption_prob(rewards.get(j))))
        .collect()
}

/// One step of the count-mode process.
pub fn step_finite<R: Rng + ?Sized>(
    state: &mut FinitePopState,
    rewards: &RewardVector,
    params: &ModelParams,
    rng: &mut R,
) -> StepOutcome {
    let s = sample_stage(state, params, rng);
    let d = adopt_stage(&s, rewards, params, rng);
    state.commit(s, d, rewards)
}

/// Literal per-individual simulation.
///
/// Stage one copies a uniformly chosen companion's last adopted option,
/// redrawing the companion while it sat out; this realizes exactly the
/// popularity-proportional law. With no adopters at all the stored
/// popularity (uniform after a reset) is sampled directly.
#[derive(Clone, Debug)]
pub struct AgentPopulation {
    state: FinitePopState,
    /// Last adopted option per individual, `None` for a sit-out.
    choices: Vec<Option<u32>>,
    /// Stage-one pick of the last step.
    picks: Vec<u32>,
    /// Whether the last pick was adopted.
    adopted: Vec<bool>,
}

impl AgentPopulation {
    pub fn new(state: FinitePopState) -> Self {
        let n = state.n as usize;
        let mut choices = vec![None; n];
        let mut i = 0;
        for (j, &dj) in state.d.iter().enumerate() {
            for _ in 0..dj {
                choices[i] = Some(j as u32);
                i += 1;
            }
        }
        Self {
            state,
            choices,
            picks: vec![0; n],
            adopted: vec![false; n],
        }
    }

    pub fn state(&self) -> &FinitePopState {
        &self.state
    }

    pub fn choices(&self) -> &[Option<u32>] {
        &self.choices
    }

    pub fn picks(&self) -> &[u32] {
        &self.picks
    }

    pub fn adopted(&self) -> &[bool] {
        &self.adopted
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        rewards: &RewardVector,
        params: &ModelParams,
        rng: &mut R,
    ) -> StepOutcome {
        let m = self.state.m();
        let n = self.choices.len();
        let any_adopter = self.state.d.iter().any(|&x| x > 0);
        let mut s = vec![0u64; m];
        let mut d = vec![0u64; m];
        for i in 0..n {
            let pick = if rng.random::<f64>() < params.mu() {
                rng.random_range(0..m)
            } else if any_adopter {
                loop {
                    if let Some(j) = self.choices[rng.random_range(0..n)] {
                        break j as usize;
                    }
                }
            } else {
                sample_index(rng, &self.state.q)
            };
            self.picks[i] = pick as u32;
            s[pick] += 1;
        }
        for i in 0..n {
            let j = self.picks[i] as usize;
            let adopt = rng.random::<f64>() < params.adoption_prob(rewards.get(j));
            self.adopted[i] = adopt;
            self.choices[i] = adopt.then_some(j as u32);
            if adopt {
                d[j] += 1;
            }
        }
        self.state.commit(s, d, rewards)
    }
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    probs.len() - 1
}

/// Anything that advances the finite process by one step.
pub trait Population {
    fn step_with<R: Rng + ?Sized>(
        &mut self,
        rewards: &RewardVector,
        params: &ModelParams,
        rng: &mut R,
    ) -> StepOutcome;

    fn pop_state(&self) -> &FinitePopState;
}

impl Population for FinitePopState {
    fn step_with<R: Rng + ?Sized>(
        &mut self,
        rewards: &RewardVector,
        params: &ModelParams,
        rng: &mut R,
    ) -> StepOutcome {
        step_finite(self, rewards, params, rng)
    }

    fn pop_state(&self) -> &FinitePopState {
        self
    }
}

impl Population for AgentPopulation {
    fn step_with<R: Rng + ?Sized>(
        &mut self,
        rewards: &RewardVector,
        params: &ModelParams,
        rng: &mut R,
    ) -> StepOutcome {
        self.step(rewards, params, rng)
    }

    fn pop_state(&self) -> &FinitePopState {
        &self.state
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Count,
    Agent,
}

/// Appends one step's accounting to a trial record.
pub(crate) fn record_step<P: Population>(
    record: &mut TrialRecord,
    pop: &P,
    outcome: &StepOutcome,
    rewards: &RewardVector,
    recording: Recording,
    t_max: usize,
) {
    let state = pop.pop_state();
    record.group_rewards.push(outcome.group_reward);
    record.leader_share.push(outcome.prev_leader_share);
    record.per_capita_rewards.push(outcome.per_capita_reward);
    record
        .min_share
        .push(state.q.iter().copied().fold(f64::INFINITY, f64::min));
    record.degenerate_resets = state.degenerate_resets;
    record.reward_checksum.update(rewards);
    if recording.keep(state.t, t_max) {
        record.trajectory.push(StepSnapshot {
            t: state.t,
            s: Some(state.s.clone()),
            d: Some(state.d.clone()),
            q: state.q.clone(),
            r: rewards.clone(),
            group_reward: outcome.group_reward,
        });
    }
}

/// Runs `t_max` steps of the finite process on `stream`.
pub fn run_finite<R: Rng + ?Sized>(
    initial: FinitePopState,
    engine: Engine,
    stream: &mut RewardStream,
    params: &ModelParams,
    t_max: usize,
    rng: &mut R,
    recording: Recording,
) -> Result<TrialRecord> {
    match engine {
        Engine::Count => run_population(initial, stream, params, t_max, rng, recording),
        Engine::Agent => run_population(
            AgentPopulation::new(initial),
            stream,
            params,
            t_max,
            rng,
            recording,
        ),
    }
}

fn run_population<P: Population, R: Rng + ?Sized>(
    mut pop: P,
    stream: &mut RewardStream,
    params: &ModelParams,
    t_max: usize,
    rng: &mut R,
    recording: Recording,
) -> Result<TrialRecord> {
    if pop.pop_state().m() != params.m() {
        return Err(Error::InvalidParams(format!(
            "state has {} options, params have {}",
            pop.pop_state().m(),
            params.m()
        )));
    }
    let mut record = TrialRecord {
        reward_checksum: StreamChecksum::default(),
        ..Default::default()
    };
    let t_end = pop.pop_state().t + t_max;
    for _ in 0..t_max {
        let r = stream.next_rewards(params)?;
        let outcome = pop.step_with(&r, params, rng);
        record_step(&mut record, &pop, &outcome, &r, recording, t_end);
    }
    Ok(record)
}
