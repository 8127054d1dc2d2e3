//! Monte Carlo regret estimates and the theoretical values they are compared
//! against.
//!
//! Regret of one realization is `eta_1 - (1/T) sum_t sum_j pop_j^{t-1} R_j^t`
//! with the lagged popularity (`Q` for the finite process, `P` for the
//! infinite one). The estimate averages realizations over independent trials;
//! the standard error is the sample standard deviation over `sqrt(trials)`.
//!
//! Trial `i` of a run with master seed `s` always draws its rewards from the
//! same stream regardless of the process, so finite and infinite estimates
//! with equal seeds are paired.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::{run_finite, Engine, FinitePopState};
use crate::infinite::{run_infinite, WeightDist};
use crate::params::{validate, Check, DerivedBounds, ModelParams};
use crate::record::{Recording, TrialRecord};
use crate::rewards::{RewardMode, RewardStream, TrialSeeds};
use crate::stats::{mean_se, MeanSe};
use crate::trials::map_trials;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Process {
    Finite(Engine),
    Infinite,
}

impl Process {
    pub fn name(&self) -> &'static str {
        match self {
            Process::Finite(_) => "finite",
            Process::Infinite => "infinite",
        }
    }
}

/// Everything needed to reproduce one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec<'a> {
    pub process: Process,
    pub params: &'a ModelParams,
    pub n: u64,
    pub t_max: usize,
    pub seed: u64,
    /// Starting popularity; uniform when `None`.
    pub start: Option<&'a [f64]>,
    pub reward_mode: RewardMode,
    pub recording: Recording,
}

impl<'a> TrialSpec<'a> {
    pub fn new(process: Process, params: &'a ModelParams, n: u64, t_max: usize, seed: u64) -> Self {
        Self {
            process,
            params,
            n,
            t_max,
            seed,
            start: None,
            reward_mode: RewardMode::Independent,
            recording: Recording::Summary,
        }
    }

    /// Runs trial number `trial`.
    pub fn run(&self, trial: u64) -> Result<TrialRecord> {
        let seeds = TrialSeeds::new(self.seed, trial);
        let mut stream = RewardStream::with_mode(seeds.rewards, Some(self.t_max), self.reward_mode);
        let m = self.params.m();
        match self.process {
            Process::Infinite => {
                let p0 = match self.start {
                    Some(p) => WeightDist::from_distribution(p.to_vec())?,
                    None => WeightDist::uniform(m),
                };
                run_infinite(p0, &mut stream, self.params, self.t_max, self.recording)
            }
            Process::Finite(engine) => {
                let st = match self.start {
                    Some(q) => FinitePopState::with_popularity(self.n, q.to_vec())?,
                    None => FinitePopState::uniform(self.n, m),
                };
                let mut rng = seeds.population_rng();
                run_finite(
                    st,
                    engine,
                    &mut stream,
                    self.params,
                    self.t_max,
                    &mut rng,
                    self.recording,
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub process: String,
    pub m: usize,
    pub n: u64,
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
    pub t: usize,
    pub trials: usize,
    pub regret_mean: f64,
    pub regret_se: f64,
    pub bound: f64,
    pub bound_name: String,
    pub leader_share_mean: f64,
    pub leader_share_se: f64,
    /// Steps (over all trials) whose minimum popularity fell below the floor.
    pub floor_violations: usize,
    pub degenerate_resets: usize,
    pub seed: u64,
}

/// Builds the summary from finished trial records.
pub fn summarize_trials(
    spec: &TrialSpec<'_>,
    records: &[TrialRecord],
) -> RegretSummary {
    let params = spec.params;
    let bounds = DerivedBounds::new(params, spec.n.max(2));
    let eta1 = params.eta()[0];
    let regrets: Vec<f64> = records.iter().map(|r| r.realized_regret(eta1)).collect();
    let shares: Vec<f64> = records.iter().map(|r| r.mean_leader_share()).collect();
    let MeanSe { mean, se, .. } = mean_se(&regrets);
    let share = mean_se(&shares);
    let (bound, bound_name) = match spec.process {
        Process::Infinite => (bounds.regret_bound_inf, "infinite-3delta"),
        Process::Finite(_) => (bounds.regret_bound_fin, "finite-6delta"),
    };
    RegretSummary {
        process: spec.process.name().to_string(),
        m: params.m(),
        n: spec.n,
        mu: params.mu(),
        beta: params.beta(),
        alpha: params.alpha(),
        t: spec.t_max,
        trials: records.len(),
        regret_mean: mean,
        regret_se: se,
        bound,
        bound_name: bound_name.to_string(),
        leader_share_mean: share.mean,
        leader_share_se: share.se,
        floor_violations: records.iter().map(|r| r.floor_violations(bounds.zeta)).sum(),
        degenerate_resets: records.iter().map(|r| r.degenerate_resets).sum(),
        seed: spec.seed,
    }
}

/// Runs `trials` independent trials and returns their records in order.
pub fn run_trials(spec: &TrialSpec<'_>, trials: usize, workers: usize) -> Result<Vec<TrialRecord>> {
    if spec.t_max == 0 {
        return Err(Error::InvalidParams("horizon must be at least 1".to_string()));
    }
    if trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".to_string()));
    }
    map_trials(workers, trials, |i| spec.run(i as u64))
        .into_iter()
        .collect()
}

pub fn estimate_regret(spec: &TrialSpec<'_>, trials: usize, workers: usize) -> Result<RegretSummary> {
    let records = run_trials(spec, trials, workers)?;
    Ok(summarize_trials(spec, &records))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub regret_mean: f64,
    pub regret_se: f64,
    /// Mean over trials of the smallest popularity at the epoch's first step.
    pub boundary_min_share_mean: f64,
    /// Trials whose smallest popularity at the boundary was below the floor.
    pub boundary_floor_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch_len: usize,
    pub zeta: f64,
    pub n: u64,
    pub trials: usize,
    pub epochs: Vec<EpochSummary>,
    /// Fraction of (trial, interior boundary) pairs below the floor.
    pub boundary_violation_rate: f64,
}

/// Finite process over `epochs` blocks of `ceil(ln(1/zeta)/delta^2)` steps.
pub fn epoch_experiment(
    params: &ModelParams,
    n: u64,
    epochs: usize,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<EpochReport> {
    let bounds = DerivedBounds::new(params, n);
    let len = bounds
        .epoch_len
        .ok_or_else(|| Error::InvalidParams("epoch length undefined for delta = 0".to_string()))?;
    if epochs == 0 {
        return Err(Error::InvalidParams("need at least one epoch".to_string()));
    }
    let spec = TrialSpec::new(Process::Finite(Engine::Count), params, n, epochs * len, seed);
    let records = run_trials(&spec, trials, workers)?;
    let eta1 = params.eta()[0];
    let m = params.m() as f64;
    let mut out = Vec::with_capacity(epochs);
    let mut interior_violations = 0;
    for e in 0..epochs {
        let regrets: Vec<f64> = records
            .iter()
            .map(|r| r.realized_regret_window(eta1, e * len, (e + 1) * len))
            .collect();
        let boundary: Vec<f64> = records
            .iter()
            .map(|r| if e == 0 { 1.0 / m } else { r.min_share[e * len - 1] })
            .collect();
        let violations = boundary.iter().filter(|&&x| x < bounds.zeta).count();
        if e > 0 {
            interior_violations += violations;
        }
        let rs = mean_se(&regrets);
        out.push(EpochSummary {
            epoch: e,
            regret_mean: rs.mean,
            regret_se: rs.se,
            boundary_min_share_mean: mean_se(&boundary).mean,
            boundary_floor_violations: violations,
        });
    }
    let interior = (epochs - 1) * trials;
    Ok(EpochReport {
        epoch_len: len,
        zeta: bounds.zeta,
        n,
        trials,
        epochs: out,
        boundary_violation_rate: if interior == 0 {
            0.0
        } else {
            interior_violations as f64 / interior as f64
        },
    })
}

/// Theoretical values shown next to the estimates. `None` marks a value
/// that is vacuous or undefined for these parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub t: usize,
    pub delta: f64,
    /// `ln m / (delta T) + 2 delta`.
    pub intermediate: Option<f64>,
    /// `ln m / (delta T) + delta + 6 mu / delta`, before using `6 mu <= delta^2`.
    pub intermediate_general: Option<f64>,
    pub regret_inf_3delta: Option<f64>,
    pub regret_fin_6delta: Option<f64>,
    /// `1 - 3 delta / (eta_1 - eta_2)`.
    pub share_bound: Option<f64>,
    /// `eta_1 - eta_2 >= 3 delta`, i.e. the share bound is non-negative.
    pub share_informative: bool,
    pub zeta: f64,
    pub epoch_len: Option<usize>,
    pub conditions: Vec<Check>,
    pub vacuous: bool,
}

pub fn bound_table(params: &ModelParams, n: u64, t_max: usize) -> BoundTable {
    let b = DerivedBounds::new(params, n.max(2));
    let delta = b.delta;
    let m = params.m() as f64;
    let tf = t_max.max(1) as f64;
    let live = delta > 0.0;
    let share_bound = if live { b.share_lower_bound } else { None };
    BoundTable {
        t: t_max,
        delta,
        intermediate: live.then(|| m.ln() / (delta * tf) + 2.0 * delta),
        intermediate_general: live
            .then(|| m.ln() / (delta * tf) + delta + 6.0 * params.mu() / delta),
        regret_inf_3delta: live.then_some(b.regret_bound_inf),
        regret_fin_6delta: live.then_some(b.regret_bound_fin),
        share_bound,
        share_informative: share_bound.is_some_and(|s| s >= 0.0),
        zeta: b.zeta,
        epoch_len: b.epoch_len,
        conditions: validate(params, n, t_max).checks,
        vacuous: !live,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ten() -> ModelParams {
        let mut eta = vec![0.95];
        eta.extend([0.05; 9]);
        ModelParams::symmetric(eta, 0.0067, 0.55).unwrap()
    }

    #[test]
    fn intermediate_bound_arithmetic() {
        let t = bound_table(&ten(), 1000, 58);
        let expect = 10f64.ln() / (0.20067069546215122 * 58.0) + 2.0 * 0.20067069546215122;
        assert_relative_eq!(t.intermediate.unwrap(), expect, epsilon = 1e-12);
        assert_relative_eq!(t.intermediate.unwrap(), 0.5992, epsilon = 1e-4);
        assert!(t.share_informative);
    }

    #[test]
    fn zero_delta_is_vacuous() {
        let p = ModelParams::symmetric(vec![0.9, 0.1], 0.1, 0.5).unwrap();
        let t = bound_table(&p, 100, 10);
        assert!(t.vacuous);
        assert!(t.intermediate.is_none() && t.regret_inf_3delta.is_none());
        assert!(t.share_bound.is_none());
        assert!(!t.share_informative);
    }

    #[test]
    fn share_bound_sign() {
        // gap 0.2 < 3 delta = 1.2: bound negative, not informative
        let p = ModelParams::symmetric(vec![0.6, 0.4], 0.01, 0.6).unwrap();
        let t = bound_table(&p, 100, 10);
        assert!(t.share_bound.unwrap() < 0.0);
        assert!(!t.share_informative);
    }

    #[test]
    fn symmetric_environment_has_no_regret() {
        let p = ModelParams::symmetric(vec![0.6; 3], 0.05, 0.7).unwrap();
        for process in [Process::Infinite, Process::Finite(Engine::Count)] {
            let spec = TrialSpec::new(process, &p, 1000, 30, 4);
            let s = estimate_regret(&spec, 400, 1).unwrap();
            assert!(s.regret_mean.abs() <= 3.0 * s.regret_se, "{s:?}");
        }
    }

    #[test]
    fn no_learning_without_signal_sensitivity() {
        let p = ModelParams::symmetric(vec![0.9, 0.1], 0.1, 0.5).unwrap();
        let spec = TrialSpec::new(Process::Infinite, &p, 0, 50, 5);
        let records = run_trials(&spec, 200, 1).unwrap();
        for r in &records {
            assert!(r.leader_share.iter().all(|&x| (x - 0.5).abs() < 1e-12));
        }
        let s = summarize_trials(&spec, &records);
        // eta_1 - mean(eta) = 0.4
        assert!((s.regret_mean - 0.4).abs() <= 3.0 * s.regret_se + 1e-12);
    }

    #[test]
    fn one_epoch_matches_plain_estimate() {
        let p = ModelParams::symmetric(vec![0.9, 0.1], 0.01, 0.6).unwrap();
        let rep = epoch_experiment(&p, 10_000, 1, 50, 6, 1).unwrap();
        assert_eq!(rep.epoch_len, 47);
        let spec = TrialSpec::new(Process::Finite(Engine::Count), &p, 10_000, 47, 6);
        let s = estimate_regret(&spec, 50, 1).unwrap();
        assert_relative_eq!(rep.epochs[0].regret_mean, s.regret_mean, epsilon = 1e-12);
        assert_relative_eq!(rep.epochs[0].regret_se, s.regret_se, epsilon = 1e-12);
    }

    #[test]
    fn processes_share_reward_streams() {
        let p = ModelParams::symmetric(vec![0.8, 0.2], 0.05, 0.6).unwrap();
        let a = TrialSpec::new(Process::Infinite, &p, 100, 20, 9).run(3).unwrap();
        let b = TrialSpec::new(Process::Finite(Engine::Count), &p, 100, 20, 9)
            .run(3)
            .unwrap();
        assert_eq!(a.reward_checksum, b.reward_checksum);
    }

    #[test]
    fn rejects_empty_runs() {
        let p = ModelParams::symmetric(vec![0.8, 0.2], 0.05, 0.6).unwrap();
        assert!(estimate_regret(&TrialSpec::new(Process::Infinite, &p, 1, 0, 1), 5, 1).is_err());
        assert!(estimate_regret(&TrialSpec::new(Process::Infinite, &p, 1, 5, 1), 0, 1).is_err());
    }
}
