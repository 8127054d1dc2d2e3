//! Browser bindings. Each export takes plain numbers, runs single-threaded
//! and returns a JSON string for the page to plot.

use serde::Serialize;
use social_mwu::coupling::{fit_points, run_coupled};
use social_mwu::finite::step_finite;
use social_mwu::infinite::step_infinite;
use social_mwu::regret::{estimate_regret, Process, TrialSpec};
use social_mwu::rewards::TrialSeeds;
use social_mwu::{FinitePopState, ModelParams, RewardStream, WeightDist};
use wasm_bindgen::prelude::*;

fn params(eta: &[f64], mu: f64, beta: f64) -> Result<ModelParams, String> {
    let mut eta = eta.to_vec();
    eta.sort_by(|a, b| b.total_cmp(a));
    ModelParams::symmetric(eta, mu, beta).map_err(|e| e.to_string())
}

fn json<T: Serialize>(x: &T) -> Result<String, String> {
    serde_json::to_string(x).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Trajectory {
    /// `p[t][j]`, infinite population.
    p: Vec<Vec<f64>>,
    /// `q[t][j]`, finite population.
    q: Vec<Vec<f64>>,
    rewards: Vec<Vec<u8>>,
}

pub fn trajectory_json(eta: &[f64], mu: f64, beta: f64, n: u32, t: u32, seed: u32) -> Result<String, String> {
    let p = params(eta, mu, beta)?;
    let seeds = TrialSeeds::new(seed as u64, 0);
    let mut stream = RewardStream::new(seeds.rewards, None);
    let mut rng = seeds.population_rng();
    let mut fin = FinitePopState::uniform(n.max(1) as u64, p.m());
    let mut inf = WeightDist::uniform(p.m());
    let mut out = Trajectory {
        p: vec![inf.probs().to_vec()],
        q: vec![fin.popularity().to_vec()],
        rewards: Vec::new(),
    };
    for _ in 0..t {
        let r = stream.next_rewards(&p).map_err(|e| e.to_string())?;
        step_infinite(&mut inf, &r, &p);
        step_finite(&mut fin, &r, &p, &mut rng);
        out.p.push(inf.probs().to_vec());
        out.q.push(fin.popularity().to_vec());
        out.rewards.push(r.bits().iter().map(|&b| u8::from(b)).collect());
    }
    json(&out)
}

#[derive(Serialize)]
struct RegretPoint {
    t: usize,
    regret: f64,
    se: f64,
    /// `ln m / (delta T) + 2 delta`
    intermediate: f64,
}

#[derive(Serialize)]
struct RegretCurve {
    delta: f64,
    bound: f64,
    points: Vec<RegretPoint>,
}

pub fn regret_curve_json(eta: &[f64], mu: f64, beta: f64, t_max: u32, trials: u32, seed: u32) -> Result<String, String> {
    let p = params(eta, mu, beta)?;
    let delta = p.delta();
    let m = p.m() as f64;
    let t_max = t_max.max(1) as usize;
    let mut ts: Vec<usize> = (0..=12)
        .map(|k| (t_max as f64).powf(k as f64 / 12.0).round() as usize)
        .collect();
    ts.dedup();
    let mut points = Vec::with_capacity(ts.len());
    for t in ts {
        let spec = TrialSpec::new(Process::Infinite, &p, 0, t, seed as u64);
        let s = estimate_regret(&spec, trials.max(2) as usize, 1).map_err(|e| e.to_string())?;
        points.push(RegretPoint {
            t,
            regret: s.regret_mean,
            se: s.regret_se,
            intermediate: m.ln() / (delta * t as f64) + 2.0 * delta,
        });
    }
    json(&RegretCurve {
        delta,
        bound: 3.0 * delta,
        points,
    })
}

#[derive(Serialize)]
struct CouplingPoint {
    n: u64,
    median: f64,
    p95: f64,
}

#[derive(Serialize)]
struct CouplingCurve {
    t: usize,
    points: Vec<CouplingPoint>,
    slope: Option<f64>,
}

pub fn coupling_json(eta: &[f64], mu: f64, beta: f64, t: u32, trials: u32, seed: u32) -> Result<String, String> {
    let p = params(eta, mu, beta)?;
    let t = t as usize;
    let mut points = Vec::new();
    for n in [100u64, 1_000, 10_000, 100_000, 1_000_000] {
        let rep = run_coupled(&p, n, t, trials.max(2) as usize, seed as u64, 1).map_err(|e| e.to_string())?;
        let step = rep.step(n, t).expect("step recorded");
        if let (Some(median), Some(p95)) = (step.median_dev, step.p95_dev) {
            points.push(CouplingPoint { n, median, p95 });
        }
    }
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|c| c.median > 0.0)
        .map(|c| (c.n as f64, c.median))
        .collect();
    let slope = fit_points(&pts, t).ok().map(|f| f.slope);
    json(&CouplingCurve { t, points, slope })
}

/// Finite and infinite popularity on shared rewards.
#[wasm_bindgen]
pub fn trajectory(eta: &[f64], mu: f64, beta: f64, n: u32, t: u32, seed: u32) -> Result<String, JsError> {
    trajectory_json(eta, mu, beta, n, t, seed).map_err(|e| JsError::new(&e))
}

/// Infinite-population regret against `T` with its bounds.
#[wasm_bindgen]
pub fn regret_curve(eta: &[f64], mu: f64, beta: f64, t_max: u32, trials: u32, seed: u32) -> Result<String, JsError> {
    regret_curve_json(eta, mu, beta, t_max, trials, seed).map_err(|e| JsError::new(&e))
}

/// Median finite/infinite deviation at step `t` for growing `N`.
#[wasm_bindgen]
pub fn coupling(eta: &[f64], mu: f64, beta: f64, t: u32, trials: u32, seed: u32) -> Result<String, JsError> {
    coupling_json(eta, mu, beta, t, trials, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn trajectory_shapes() {
        let v: Value = serde_json::from_str(&trajectory_json(&[0.3, 0.7], 0.1, 0.6, 500, 20, 1).unwrap()).unwrap();
        assert_eq!(v["p"].as_array().unwrap().len(), 21);
        assert_eq!(v["q"][0].as_array().unwrap().len(), 2);
        assert_eq!(v["rewards"].as_array().unwrap().len(), 20);
    }

    #[test]
    fn regret_curve_under_bound() {
        let v: Value =
            serde_json::from_str(&regret_curve_json(&[0.9, 0.2, 0.1], 0.01, 0.6, 200, 50, 2).unwrap()).unwrap();
        let bound = v["bound"].as_f64().unwrap();
        let last = v["points"].as_array().unwrap().last().unwrap();
        assert_eq!(last["t"], 200);
        assert!(last["regret"].as_f64().unwrap() < bound);
    }

    #[test]
    fn coupling_shrinks_with_population() {
        let v: Value = serde_json::from_str(&coupling_json(&[0.7, 0.3], 0.1, 0.6, 3, 40, 3).unwrap()).unwrap();
        let slope = v["slope"].as_f64().unwrap();
        assert!(slope < -0.3, "{slope}");
    }

    #[test]
    fn bad_parameters_are_reported() {
        assert!(trajectory_json(&[0.5], 0.1, 0.6, 10, 5, 0).is_err());
        assert!(regret_curve_json(&[0.5, 0.4], 0.1, 1.5, 10, 5, 0).is_err());
    }
}
