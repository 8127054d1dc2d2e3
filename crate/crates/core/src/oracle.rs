//! Exact transition law of the finite process for tiny populations.
//!
//! States are adopter-count vectors `d`; the popularity of a state is
//! `d / sum(d)`, or uniform when nobody adopted (which is also the initial
//! state). One step enumerates every reward outcome, every stage-one count
//! vector (multinomial) and every adoption count vector (independent
//! binomials). Individuals are exchangeable, so counts carry the full law.
//!
//! Probabilities are `f64`; terms contributing to one state are summed in
//! ascending order of magnitude.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::{sampling_probs, step_finite, FinitePopState};
use crate::params::ModelParams;
use crate::rewards::{RewardStream, RewardVector};
use crate::stats::total_variation;

pub const MAX_N: u64 = 4;
pub const MAX_M: usize = 3;
pub const MAX_T: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub n: u64,
    pub m: usize,
    pub step: usize,
    pub probs: BTreeMap<Vec<u64>, f64>,
}

impl StateDistribution {
    /// No adopters, uniform popularity.
    pub fn initial(n: u64, m: usize) -> Result<Self> {
        check_size(n, m)?;
        let mut probs = BTreeMap::new();
        probs.insert(vec![0; m], 1.0);
        Ok(Self {
            n,
            m,
            step: 0,
            probs,
        })
    }

    pub fn total(&self) -> f64 {
        sorted_sum(self.probs.values().copied().collect())
    }

    pub fn prob(&self, d: &[u64]) -> f64 {
        self.probs.get(d).copied().unwrap_or(0.0)
    }

    /// `E[Q_j]` over the distribution.
    pub fn expected_popularity(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (d, &p) in &self.probs {
            for (o, q) in out.iter_mut().zip(popularity(d)) {
                *o += p * q;
            }
        }
        out
    }

    /// `d_1,...,d_m,probability` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = (1..=self.m).map(|j| format!("d_{j}")).collect();
        let _ = writeln!(s, "{},probability", header.join(","));
        for (d, p) in &self.probs {
            let cells: Vec<String> = d.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{},{p:.17e}", cells.join(","));
        }
        s
    }
}

fn check_size(n: u64, m: usize) -> Result<()> {
    if n == 0 || n > MAX_N || m > MAX_M {
        return Err(Error::SizeLimit(format!(
            "N = {n}, m = {m}; exact enumeration supports 1 <= N <= {MAX_N}, m <= {MAX_M}"
        )));
    }
    Ok(())
}

/// Popularity implied by adopter counts.
pub fn popularity(d: &[u64]) -> Vec<f64> {
    let total: u64 = d.iter().sum();
    if total == 0 {
        vec![1.0 / d.len() as f64; d.len()]
    } else {
        d.iter().map(|&x| x as f64 / total as f64).collect()
    }
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    terms.into_iter().sum()
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binom_pmf(n: u64, k: u64, p: f64) -> f64 {
    choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// All vectors of `m` non-negative integers summing to `n`.
fn compositions(n: u64, m: usize) -> Vec<Vec<u64>> {
    if m == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, m - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn multinomial_pmf(s: &[u64], probs: &[f64]) -> f64 {
    let mut left: u64 = s.iter().sum();
    let mut coef = 1.0;
    for &k in s {
        coef *= choose(left, k);
        left -= k;
    }
    s.iter()
        .zip(probs)
        .fold(coef, |acc, (&k, &p)| acc * p.powi(k as i32))
}

/// All reward vectors with their probabilities.
pub fn reward_outcomes(params: &ModelParams) -> Vec<(RewardVector, f64)> {
    let m = params.m();
    (0..1u32 << m)
        .map(|mask| {
            let bits: Vec<bool> = (0..m).map(|j| mask >> j & 1 == 1).collect();
            let p = bits
                .iter()
                .zip(params.eta())
                .fold(1.0, |acc, (&b, &q)| acc * if b { q } else { 1.0 - q });
            (RewardVector::new(bits), p)
        })
        .collect()
}

/// Exact one-step pushforward.
pub fn exact_step(dist: &StateDistribution, params: &ModelParams) -> Result<StateDistribution> {
    check_size(dist.n, dist.m)?;
    if dist.m != params.m() {
        return Err(Error::InvalidParams("option count mismatch".to_string()));
    }
    let rewards = reward_outcomes(params);
    let samples = compositions(dist.n, dist.m);
    let mut terms: BTreeMap<Vec<u64>, Vec<f64>> = BTreeMap::new();
    for (d, &pd) in &dist.probs {
        let probs = sampling_probs(&popularity(d), params.mu());
        for (r, pr) in &rewards {
            if *pr == 0.0 {
                continue;
            }
            for s in &samples {
                let ps = multinomial_pmf(s, &probs);
                if ps == 0.0 {
                    continue;
                }
                let adopt: Vec<f64> = (0..dist.m).map(|j| params.adoption_prob(r.get(j))).collect();
                for next in compositions_bounded(s) {
                    let pa = next
                        .iter()
                        .zip(s)
                        .zip(&adopt)
                        .fold(1.0, |acc, ((&k, &sj), &a)| acc * binom_pmf(sj, k, a));
                    let w = pd * pr * ps * pa;
                    if w > 0.0 {
                        terms.entry(next).or_default().push(w);
                    }
                }
            }
        }
    }
    Ok(StateDistribution {
        n: dist.n,
        m: dist.m,
        step: dist.step + 1,
        probs: terms.into_iter().map(|(k, v)| (k, sorted_sum(v))).collect(),
    })
}

/// All `d` with `0 <= d_j <= s_j`.
fn compositions_bounded(s: &[u64]) -> Vec<Vec<u64>> {
    s.iter().fold(vec![Vec::new()], |acc, &sj| {
        acc.into_iter()
            .flat_map(|prefix| {
                (0..=sj).map(move |k| {
                    let mut v = prefix.clone();
                    v.push(k);
                    v
                })
            })
            .collect()
    })
}

/// Exact finite-population regret for `T <= 3`, computed by propagating the
/// state distribution. The joint expectation `E[Q_j^{t-1} R_j^t]` is
/// enumerated directly and checked against `E[Q_j^{t-1}] eta_j`.
pub fn exact_regret(params: &ModelParams, n: u64, t_max: usize) -> Result<f64> {
    if t_max == 0 || t_max > MAX_T {
        return Err(Error::SizeLimit(format!(
            "T = {t_max}; exact regret supports 1 <= T <= {MAX_T}"
        )));
    }
    let rewards = reward_outcomes(params);
    let mut dist = StateDistribution::initial(n, params.m())?;
    let mut total = 0.0;
    for _ in 0..t_max {
        let mut joint = 0.0;
        for (d, &pd) in &dist.probs {
            let q = popularity(d);
            for (r, pr) in &rewards {
                joint += pd * pr * r.dot(&q);
            }
        }
        let factored: f64 = dist
            .expected_popularity()
            .iter()
            .zip(params.eta())
            .map(|(q, e)| q * e)
            .sum();
        if (joint - factored).abs() > 1e-10 {
            return Err(Error::InsufficientData(format!(
                "factorization self-check failed: {joint} vs {factored}"
            )));
        }
        total += joint;
        dist = exact_step(&dist, params)?;
    }
    Ok(params.eta()[0] - total / t_max as f64)
}

/// Empirical distribution of adopter counts after `steps` count-mode steps
/// from the initial state, over `samples` independent runs.
pub fn empirical_distribution(
    params: &ModelParams,
    n: u64,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<BTreeMap<Vec<u64>, f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = RewardStream::new(crate::rewards::split_seed(seed, 1), None);
    let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    for _ in 0..samples {
        let mut st = FinitePopState::uniform(n, params.m());
        for _ in 0..steps {
            let r = stream.next_rewards(params)?;
            step_finite(&mut st, &r, params, &mut rng);
        }
        *counts.entry(st.adopters().to_vec()).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / samples as f64))
        .collect())
}

/// Total-variation distance between the exact law and an empirical one.
pub fn tv_distance(exact: &StateDistribution, empirical: &BTreeMap<Vec<u64>, f64>) -> f64 {
    let mut keys: Vec<&Vec<u64>> = exact.probs.keys().chain(empirical.keys()).collect();
    keys.sort();
    keys.dedup();
    let a: Vec<f64> = keys.iter().map(|k| exact.prob(k)).collect();
    let b: Vec<f64> = keys
        .iter()
        .map(|k| empirical.get(*k).copied().unwrap_or(0.0))
        .collect();
    total_variation(a.iter().zip(&b))
}
