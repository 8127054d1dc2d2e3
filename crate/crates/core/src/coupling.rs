//! Finite and infinite processes driven by one shared reward stream.
//!
//! Only the rewards are shared: the finite population's sampling and
//! adoption noise comes from its own generator. The per-step statistic is
//! the multiplicative deviation
//! `max_j max(|P_j/Q_j - 1|, |Q_j/P_j - 1|)`, which is infinite when some
//! option has lost all its adopters.
//!
//! Runs over several population sizes reuse the same master seed for every
//! size, so each size sees the same reward realizations trial by trial.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::{step_finite, FinitePopState};
use crate::infinite::{step_infinite, WeightDist};
use crate::params::{DerivedBounds, ModelParams, DELTA_PP_CONSTANT, DELTA_PP_CONSTANT_ALT};
use crate::rewards::{RewardStream, StreamChecksum, TrialSeeds};
use crate::stats::{median, ols_slope, quantile};
use crate::trials::map_trials;

/// Multiplicative distance between two distributions.
pub fn ratio_deviation(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a <= 0.0 || b <= 0.0 {
                if a == b {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (a / b - 1.0).abs().max((b / a - 1.0).abs())
            }
        })
        .fold(0.0, f64::max)
}

/// One coupled trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrace {
    pub n: u64,
    pub seed: u64,
    /// Deviation at `t = 0..=t_max`.
    pub deviations: Vec<f64>,
    /// Steps where some `Q_j = 0`.
    pub zero_q_events: usize,
    pub finite_checksum: StreamChecksum,
    pub infinite_checksum: StreamChecksum,
}

/// Runs both processes in lockstep from the uniform distribution.
pub fn coupled_trial(
    params: &ModelParams,
    n: u64,
    t_max: usize,
    master_seed: u64,
    trial: u64,
) -> Result<CouplingTrace> {
    let seeds = TrialSeeds::new(master_seed, trial);
    let mut stream = RewardStream::new(seeds.rewards, Some(t_max));
    let mut rng = seeds.population_rng();
    let m = params.m();
    let mut fin = FinitePopState::uniform(n, m);
    let mut inf = WeightDist::uniform(m);
    let mut deviations = Vec::with_capacity(t_max + 1);
    deviations.push(ratio_deviation(inf.probs(), fin.popularity()));
    let mut zero_q_events = 0;
    let mut finite_checksum = StreamChecksum::default();
    let mut infinite_checksum = StreamChecksum::default();
    for _ in 0..t_max {
        let r = stream.next_rewards(params)?;
        step_infinite(&mut inf, &r, params);
        infinite_checksum.update(&r);
        step_finite(&mut fin, &r, params, &mut rng);
        finite_checksum.update(&r);
        if fin.popularity().contains(&0.0) {
            zero_q_events += 1;
        }
        deviations.push(ratio_deviation(inf.probs(), fin.popularity()));
    }
    Ok(CouplingTrace {
        n,
        seed: master_seed,
        deviations,
        zero_q_events,
        finite_checksum,
        infinite_checksum,
    })
}

/// Aggregate over trials at one `(N, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingStep {
    pub n: u64,
    pub t: usize,
    /// Median over trials with finite deviation.
    pub median_dev: Option<f64>,
    pub p95_dev: Option<f64>,
    /// `5^t delta''` with the configured constant.
    pub bound_delta_t: f64,
    /// The same bound with the alternative constant.
    pub bound_delta_t_alt: f64,
    /// `bound_delta_t >= 1`: the literal bound says nothing at this scale.
    pub vacuous: bool,
    /// Fraction of trials within `bound_delta_t`; `None` when vacuous.
    pub within_bound_fraction: Option<f64>,
    /// Trials where some option had no adopters at this step.
    pub degenerate_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub t: usize,
    /// Slope of `ln(median deviation)` against `ln N`.
    pub slope: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub params: ModelParams,
    pub n_values: Vec<u64>,
    pub t_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub per_t: Vec<CouplingStep>,
    pub scaling_slope: Option<ScalingFit>,
}

impl CouplingReport {
    pub fn step(&self, n: u64, t: usize) -> Option<&CouplingStep> {
        self.per_t.iter().find(|s| s.n == n && s.t == t)
    }

    /// Number of `t` where the median deviation decreased from `t` to `t+1`.
    pub fn median_inversions(&self, n: u64) -> usize {
        let meds: Vec<f64> = (0..=self.t_max)
            .filter_map(|t| self.step(n, t).and_then(|s| s.median_dev))
            .collect();
        meds.windows(2).filter(|w| w[1] < w[0]).count()
    }
}

fn summarize(
    params: &ModelParams,
    n: u64,
    traces: &[CouplingTrace],
    t_max: usize,
    constant: f64,
) -> Vec<CouplingStep> {
    let other = if constant == DELTA_PP_CONSTANT {
        DELTA_PP_CONSTANT_ALT
    } else {
        DELTA_PP_CONSTANT
    };
    let bounds = DerivedBounds::with_constant(params, n, constant);
    let alt = DerivedBounds::with_constant(params, n, other);
    (0..=t_max)
        .map(|t| {
            let devs: Vec<f64> = traces.iter().map(|tr| tr.deviations[t]).collect();
            let bound = bounds.delta_t(t);
            let vacuous = bound >= 1.0;
            let within = (!vacuous && !devs.is_empty()).then(|| {
                devs.iter().filter(|&&d| d <= bound).count() as f64 / devs.len() as f64
            });
            CouplingStep {
                n,
                t,
                median_dev: median(&devs),
                p95_dev: quantile(&devs, 0.95),
                bound_delta_t: bound,
                bound_delta_t_alt: alt.delta_t(t),
                vacuous,
                within_bound_fraction: within,
                degenerate_count: devs.iter().filter(|d| !d.is_finite()).count(),
            }
        })
        .collect()
}

/// Coupled trials at one population size.
pub fn run_coupled(
    params: &ModelParams,
    n: u64,
    t_max: usize,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<CouplingReport> {
    run_coupled_sweep(params, &[n], t_max, trials, seed, workers, None)
}

/// Coupled trials over several population sizes, with an optional
/// `1/sqrt(N)` scaling fit at step `fit_t`.
pub fn run_coupled_sweep(
    params: &ModelParams,
    n_values: &[u64],
    t_max: usize,
    trials: usize,
    seed: u64,
    workers: usize,
    fit_t: Option<usize>,
) -> Result<CouplingReport> {
    run_coupled_sweep_with(params, n_values, t_max, trials, seed, workers, fit_t, DELTA_PP_CONSTANT)
}

/// [`run_coupled_sweep`] with an explicit constant inside `delta''`; the
/// report's alternative bound uses the other standard constant.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled_sweep_with(
    params: &ModelParams,
    n_values: &[u64],
    t_max: usize,
    trials: usize,
    seed: u64,
    workers: usize,
    fit_t: Option<usize>,
    constant: f64,
) -> Result<CouplingReport> {
    let mut per_t = Vec::new();
    for &n in n_values {
        let traces = map_trials(workers, trials, |i| {
            coupled_trial(params, n, t_max, seed, i as u64)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        per_t.extend(summarize(params, n, &traces, t_max, constant));
    }
    let mut report = CouplingReport {
        params: params.clone(),
        n_values: n_values.to_vec(),
        t_max,
        trials,
        seed,
        per_t,
        scaling_slope: None,
    };
    if let Some(t) = fit_t {
        report.scaling_slope = Some(scaling_fit(&report, t)?);
    }
    Ok(report)
}

/// Least-squares slope of `ln(median deviation)` against `ln N` at step `t`.
pub fn scaling_fit(report: &CouplingReport, t: usize) -> Result<ScalingFit> {
    let points: Vec<(f64, f64)> = report
        .per_t
        .iter()
        .filter(|s| s.t == t)
        .filter_map(|s| s.median_dev.filter(|&d| d > 0.0).map(|d| (s.n as f64, d)))
        .collect();
    fit_points(&points, t)
}

/// Same fit on explicit `(N, deviation)` pairs.
pub fn fit_points(points: &[(f64, f64)], t: usize) -> Result<ScalingFit> {
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs at least 3 population sizes, got {}",
            ns.len()
        )));
    }
    if ns[ns.len() - 1] / ns[0] < 100.0 {
        return Err(Error::InsufficientData(
            "population sizes must span at least two decades".to_string(),
        ));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, se) = ols_slope(&x, &y);
    Ok(ScalingFit { t, slope, se })
}
