//! Per-step quality signals and the seeding discipline for trials.
//!
//! Seed splitting: every derived seed is
//! `splitmix64(parent ^ splitmix64(index + GOLDEN_GAMMA))`. A sweep cell gets
//! `split_seed(master, cell)`, a trial gets `split_seed(cell_seed, trial)`,
//! and inside a trial the reward stream and the population noise use
//! `split_seed(trial_seed, 0)` and `split_seed(trial_seed, 1)` respectively.
//! Each seed initializes a `ChaCha8Rng` through `seed_from_u64`.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn split_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// The two independent generators owned by one trial.
pub struct TrialSeeds {
    pub rewards: u64,
    pub population: u64,
}

impl TrialSeeds {
    pub fn new(master: u64, trial: u64) -> Self {
        let seed = split_seed(master, trial);
        Self {
            rewards: split_seed(seed, 0),
            population: split_seed(seed, 1),
        }
    }

    pub fn population_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.population)
    }
}

/// Quality signals of all options for one step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RewardVector(Vec<bool>);

impl RewardVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// `r_j` as `0.0` / `1.0`.
    pub fn value(&self, j: usize) -> f64 {
        if self.0[j] {
            1.0
        } else {
            0.0
        }
    }

    /// `sum_j weights_j r_j`.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        weights
            .iter()
            .zip(&self.0)
            .filter(|(_, &r)| r)
            .map(|(w, _)| *w)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Independent Bernoulli(eta_j) per option and step.
    Independent,
    /// Two options, exactly one good per step; option 0 is good with
    /// probability `eta_0` (requires `eta_1 = 1 - eta_0`).
    CoupledBinary,
}

enum Source {
    Random { rng: ChaCha8Rng, mode: RewardMode },
    Replay(Vec<RewardVector>),
}

/// Reproducible stream of reward vectors for one trial.
pub struct RewardStream {
    source: Source,
    t: usize,
    t_max: Option<usize>,
}

impl RewardStream {
    pub fn new(seed: u64, t_max: Option<usize>) -> Self {
        Self::with_mode(seed, t_max, RewardMode::Independent)
    }

    pub fn with_mode(seed: u64, t_max: Option<usize>, mode: RewardMode) -> Self {
        Self {
            source: Source::Random {
                rng: ChaCha8Rng::seed_from_u64(seed),
                mode,
            },
            t: 0,
            t_max,
        }
    }

    /// Replays previously recorded vectors; the horizon is the trace length.
    pub fn replay(vectors: Vec<RewardVector>) -> Self {
        let t_max = Some(vectors.len());
        Self {
            source: Source::Replay(vectors),
            t: 0,
            t_max,
        }
    }

    /// Number of vectors already produced.
    pub fn position(&self) -> usize {
        self.t
    }

    pub fn next_rewards(&mut self, params: &ModelParams) -> Result<RewardVector> {
        if let Some(t_max) = self.t_max {
            if self.t >= t_max {
                return Err(Error::HorizonExhausted { t: self.t, t_max });
            }
        }
        let r = match &mut self.source {
            Source::Random { rng, mode } => draw(rng, *mode, params)?,
            Source::Replay(v) => {
                let r = v[self.t].clone();
                if r.len() != params.m() {
                    return Err(Error::Trace(format!(
                        "step {} has {} entries, expected {}",
                        self.t,
                        r.len(),
                        params.m()
                    )));
                }
                r
            }
        };
        self.t += 1;
        Ok(r)
    }

    /// Draws `steps` vectors (bounded by the horizon).
    pub fn take_vectors(&mut self, params: &ModelParams, steps: usize) -> Result<Vec<RewardVector>> {
        (0..steps).map(|_| self.next_rewards(params)).collect()
    }
}

fn draw(rng: &mut ChaCha8Rng, mode: RewardMode, params: &ModelParams) -> Result<RewardVector> {
    let eta = params.eta();
    Ok(match mode {
        RewardMode::Independent => {
            RewardVector(eta.iter().map(|&q| rng.random::<f64>() < q).collect())
        }
        RewardMode::CoupledBinary => {
            if eta.len() != 2 || (eta[0] + eta[1] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParams(
                    "coupled-binary rewards need m = 2 and eta_1 + eta_2 = 1".to_string(),
                ));
            }
            let first = rng.random::<f64>() < eta[0];
            RewardVector(vec![first, !first])
        }
    })
}

/// FNV-1a over the bits of a reward sequence; used to confirm two consumers
/// saw the same stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamChecksum(u64);

impl Default for StreamChecksum {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl StreamChecksum {
    pub fn update(&mut self, r: &RewardVector) {
        for &b in r.bits() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
        self.0 ^= 0xff;
        self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

/// Text trace: one line per step, `m` space-separated bits.
pub fn write_trace<W: Write>(mut w: W, vectors: &[RewardVector]) -> Result<()> {
    for r in vectors {
        let line: Vec<&str> = r.bits().iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<RewardVector>> {
    let mut out = Vec::new();
    let mut width = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bits = line
            .split_whitespace()
            .map(|tok| match tok {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Trace(format!(
                    "line {}: expected 0 or 1, got {other:?}",
                    lineno + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(bits.len()),
            Some(w) if w != bits.len() => {
                return Err(Error::Trace(format!(
                    "line {}: {} entries, expected {w}",
                    lineno + 1,
                    bits.len()
                )))
            }
            _ => {}
        }
        out.push(RewardVector(bits));
    }
    Ok(out)
}
