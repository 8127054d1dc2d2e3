//! Experiment dispatch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind, Format, Mode};
use super::output::{fmt_f64, fmt_opt, JsonDoc, Table, SCHEMA_VERSION, TOOL_VERSION};
use crate::coupling::{fit_points, run_coupled_sweep_with, CouplingReport};
use crate::error::{Error, Result};
use crate::infinite::audit_potential;
use crate::oracle::{empirical_distribution, exact_regret, exact_step, tv_distance, StateDistribution};
use crate::params::ModelParams;
use crate::record::{Recording, TrialRecord};
use crate::regret::{epoch_experiment, estimate_regret, Process, RegretSummary, TrialSpec};
use crate::rewards::split_seed;

/// Verdict of a pass/fail experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub detail: String,
}

/// Result of one experiment, ready to render.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub kind: ExperimentKind,
    pub table: Table,
    pub json: Value,
    pub check: Option<CheckOutcome>,
}

impl RunOutput {
    /// Full artifact text with version and resolved config embedded.
    pub fn render(&self, cfg: &ExperimentConfig, format: Format) -> Result<String> {
        match format {
            Format::Csv => {
                let mut t = self.table.clone();
                let mut meta = vec![
                    ("version".to_string(), TOOL_VERSION.to_string()),
                    ("experiment".to_string(), self.kind.to_string()),
                ];
                meta.extend(cfg.resolved().into_iter().map(|(k, v)| (format!("config.{k}"), v)));
                meta.append(&mut t.meta);
                t.meta = meta;
                Ok(t.to_csv())
            }
            Format::Json => JsonDoc {
                schema: SCHEMA_VERSION,
                version: TOOL_VERSION.to_string(),
                experiment: self.kind.to_string(),
                config: cfg.resolved(),
                result: self.json.clone(),
            }
            .to_string_pretty(),
        }
    }
}

fn to_json<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

pub fn run(cfg: &ExperimentConfig, kind: ExperimentKind, workers: usize) -> Result<RunOutput> {
    match kind {
        ExperimentKind::Simulate => simulate(cfg),
        ExperimentKind::Regret => regret(cfg, workers),
        ExperimentKind::Couple => couple(cfg, workers),
        ExperimentKind::Sweep => sweep(cfg, workers),
        ExperimentKind::OracleCheck => oracle_check(cfg, workers),
        ExperimentKind::Audit => audit(cfg, workers),
    }
}

fn spec<'a>(cfg: &'a ExperimentConfig, process: Process, recording: Recording) -> TrialSpec<'a> {
    let mut s = TrialSpec::new(process, &cfg.params, cfg.n, cfg.t, cfg.seed);
    s.start = cfg.p0.as_deref();
    s.reward_mode = cfg.reward_mode;
    s.recording = recording;
    s
}

pub const TRAJECTORY_COLUMNS: [&str; 7] = ["t", "j", "S_j", "D_j", "Q_j", "R_j", "group_reward"];

/// Trial 0 of the configured process, one row per `(t, j)`. Coupled mode
/// runs both processes on the same rewards and appends the column `P_j`.
fn simulate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rec = Recording::Every(cfg.trace_stride);
    let finite = spec(cfg, Process::Finite(cfg.engine), rec);
    let infinite = spec(cfg, Process::Infinite, rec);
    let (primary, shadow) = match cfg.mode {
        Mode::Finite => (finite.run(0)?, None),
        Mode::Infinite => (infinite.run(0)?, None),
        Mode::Coupled => (finite.run(0)?, Some(infinite.run(0)?)),
        Mode::Oracle => {
            return Err(Error::Config("simulate supports finite, infinite or coupled mode".to_string()))
        }
    };
    let mut cols: Vec<&str> = TRAJECTORY_COLUMNS.to_vec();
    if shadow.is_some() {
        cols.push("P_j");
    }
    let mut table = Table::new(cols);
    for (k, snap) in primary.trajectory.iter().enumerate() {
        for j in 0..snap.q.len() {
            let count = |v: &Option<Vec<u64>>| v.as_ref().map(|x| x[j].to_string()).unwrap_or_default();
            let mut row = vec![
                snap.t.to_string(),
                (j + 1).to_string(),
                count(&snap.s),
                count(&snap.d),
                fmt_f64(snap.q[j]),
                u8::from(snap.r.get(j)).to_string(),
                fmt_f64(snap.group_reward),
            ];
            if let Some(sh) = &shadow {
                row.push(fmt_f64(sh.trajectory[k].q[j]));
            }
            table.push(row);
        }
    }
    let json = match &shadow {
        Some(sh) => json!({ "finite": primary.trajectory, "infinite": sh.trajectory }),
        None => to_json(&primary.trajectory)?,
    };
    Ok(RunOutput {
        kind: ExperimentKind::Simulate,
        table,
        json,
        check: None,
    })
}

pub const REGRET_COLUMNS: [&str; 14] = [
    "process",
    "m",
    "n",
    "mu",
    "beta",
    "T",
    "trials",
    "regret_mean",
    "regret_se",
    "bound",
    "bound_name",
    "leader_share_mean",
    "floor_violations",
    "seed",
];

fn regret_row(s: &RegretSummary) -> Vec<String> {
    vec![
        s.process.clone(),
        s.m.to_string(),
        s.n.to_string(),
        fmt_f64(s.mu),
        fmt_f64(s.beta),
        s.t.to_string(),
        s.trials.to_string(),
        fmt_f64(s.regret_mean),
        fmt_f64(s.regret_se),
        fmt_f64(s.bound),
        s.bound_name.clone(),
        fmt_f64(s.leader_share_mean),
        s.floor_violations.to_string(),
        s.seed.to_string(),
    ]
}

/// Exact finite-population regret presented as a summary row.
fn exact_summary(cfg: &ExperimentConfig) -> Result<RegretSummary> {
    let p = &cfg.params;
    let r = exact_regret(p, cfg.n, cfg.t)?;
    let b = crate::params::DerivedBounds::new(p, cfg.n.max(2));
    Ok(RegretSummary {
        process: "exact".to_string(),
        m: p.m(),
        n: cfg.n,
        mu: p.mu(),
        beta: p.beta(),
        alpha: p.alpha(),
        t: cfg.t,
        trials: 0,
        regret_mean: r,
        regret_se: 0.0,
        bound: b.regret_bound_fin,
        bound_name: "finite-6delta".to_string(),
        leader_share_mean: f64::NAN,
        leader_share_se: f64::NAN,
        floor_violations: 0,
        degenerate_resets: 0,
        seed: cfg.seed,
    })
}

/// Regret bounds from a non-uniform start assume every option starts above
/// the popularity floor; lower starts need `exploratory = true`.
fn check_start(cfg: &ExperimentConfig) -> Result<()> {
    let Some(p0) = &cfg.p0 else { return Ok(()) };
    let zeta = crate::params::DerivedBounds::new(&cfg.params, cfg.n.max(2)).zeta;
    let low = p0.iter().copied().fold(f64::INFINITY, f64::min);
    if low < zeta && !cfg.exploratory {
        return Err(Error::Config(format!(
            "p0 has an entry {low} below the floor {zeta}; set exploratory = true to run anyway"
        )));
    }
    Ok(())
}

fn regret_summaries(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<RegretSummary>> {
    check_start(cfg)?;
    let est = |p: Process| estimate_regret(&spec(cfg, p, Recording::Summary), cfg.trials, workers);
    Ok(match cfg.mode {
        Mode::Finite => vec![est(Process::Finite(cfg.engine))?],
        Mode::Infinite => vec![est(Process::Infinite)?],
        Mode::Coupled => vec![est(Process::Finite(cfg.engine))?, est(Process::Infinite)?],
        Mode::Oracle => vec![exact_summary(cfg)?],
    })
}

fn regret(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    if cfg.epochs > 0 {
        if cfg.mode != Mode::Finite {
            return Err(Error::Config("epochs require mode = finite".to_string()));
        }
        let rep = epoch_experiment(&cfg.params, cfg.n, cfg.epochs, cfg.trials, cfg.seed, workers)?;
        let mut table = Table::new([
            "epoch",
            "epoch_len",
            "regret_mean",
            "regret_se",
            "boundary_min_share_mean",
            "boundary_floor_violations",
        ]);
        table.meta.push(("zeta".into(), fmt_f64(rep.zeta)));
        table.meta.push(("boundary_violation_rate".into(), fmt_f64(rep.boundary_violation_rate)));
        for e in &rep.epochs {
            table.push(vec![
                e.epoch.to_string(),
                rep.epoch_len.to_string(),
                fmt_f64(e.regret_mean),
                fmt_f64(e.regret_se),
                fmt_f64(e.boundary_min_share_mean),
                e.boundary_floor_violations.to_string(),
            ]);
        }
        return Ok(RunOutput {
            kind: ExperimentKind::Regret,
            table,
            json: to_json(&rep)?,
            check: None,
        });
    }
    let sums = regret_summaries(cfg, workers)?;
    let mut table = Table::new(REGRET_COLUMNS);
    for s in &sums {
        table.push(regret_row(s));
    }
    let json = if sums.len() == 1 { to_json(&sums[0])? } else { to_json(&sums)? };
    Ok(RunOutput {
        kind: ExperimentKind::Regret,
        table,
        json,
        check: None,
    })
}

pub const COUPLING_COLUMNS: [&str; 9] = [
    "n",
    "t",
    "median_dev",
    "p95_dev",
    "bound_delta_t",
    "bound_delta_t_alt",
    "vacuous",
    "within_bound_fraction",
    "degenerate_count",
];

fn coupling_rows(rep: &CouplingReport) -> Vec<Vec<String>> {
    rep.per_t
        .iter()
        .map(|s| {
            vec![
                s.n.to_string(),
                s.t.to_string(),
                fmt_opt(s.median_dev),
                fmt_opt(s.p95_dev),
                fmt_f64(s.bound_delta_t),
                fmt_f64(s.bound_delta_t_alt),
                s.vacuous.to_string(),
                fmt_opt(s.within_bound_fraction),
                s.degenerate_count.to_string(),
            ]
        })
        .collect()
}

fn coupling_report(cfg: &ExperimentConfig, workers: usize) -> Result<CouplingReport> {
    run_coupled_sweep_with(
        &cfg.params,
        &cfg.n_values,
        cfg.t,
        cfg.trials,
        cfg.seed,
        workers,
        cfg.fit_t,
        cfg.delta_pp_constant,
    )
}

fn couple(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let rep = coupling_report(cfg, workers)?;
    let mut table = Table::new(COUPLING_COLUMNS);
    if let Some(fit) = &rep.scaling_slope {
        table.meta.push(("scaling_slope".into(), fmt_f64(fit.slope)));
        table.meta.push(("scaling_slope_se".into(), fmt_f64(fit.se)));
        table.meta.push(("scaling_t".into(), fit.t.to_string()));
    }
    for r in coupling_rows(&rep) {
        table.push(r);
    }
    Ok(RunOutput {
        kind: ExperimentKind::Couple,
        table,
        json: to_json(&rep)?,
        check: None,
    })
}

/// Cartesian product of the axes; cell `i` runs with seed
/// `split_seed(seed, i)`. Finite/infinite/oracle modes give one regret row
/// per cell, coupled mode gives the coupling rows of each cell.
fn sweep(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let cells = cfg.cells()?;
    let axis_keys: Vec<String> = cfg.sweep.iter().map(|a| a.key.clone()).collect();
    let inner: Vec<&str> = if cfg.mode == Mode::Coupled {
        COUPLING_COLUMNS.to_vec()
    } else {
        REGRET_COLUMNS.to_vec()
    };
    let mut cols = vec!["cell".to_string()];
    cols.extend(axis_keys.iter().map(|k| format!("axis_{k}")));
    cols.extend(inner.iter().map(|s| s.to_string()));
    let mut table = Table::new(cols);
    let mut json_cells = Vec::with_capacity(cells.len());
    let mut fit_pts = Vec::new();
    for (i, (assigned, cell)) in cells.into_iter().enumerate() {
        let mut cell = cell;
        cell.seed = split_seed(cfg.seed, i as u64);
        let prefix: Vec<String> = std::iter::once(i.to_string())
            .chain(assigned.iter().map(|(_, v)| v.clone()))
            .collect();
        let result = if cfg.mode == Mode::Coupled {
            let rep = coupling_report(&ExperimentConfig { fit_t: None, ..cell.clone() }, workers)?;
            if let Some(t) = cfg.fit_t {
                for s in rep.per_t.iter().filter(|s| s.t == t) {
                    if let Some(d) = s.median_dev.filter(|&d| d > 0.0) {
                        fit_pts.push((s.n as f64, d));
                    }
                }
            }
            for r in coupling_rows(&rep) {
                table.push(prefix.iter().cloned().chain(r).collect());
            }
            to_json(&rep)?
        } else {
            let sums = regret_summaries(&cell, workers)?;
            for s in &sums {
                table.push(prefix.iter().cloned().chain(regret_row(s)).collect());
            }
            to_json(&sums)?
        };
        json_cells.push(json!({
            "cell": i,
            "seed": cell.seed,
            "assign": assigned,
            "result": result,
        }));
    }
    let mut fit_json = Value::Null;
    if let Some(t) = cfg.fit_t.filter(|_| cfg.mode == Mode::Coupled) {
        let fit = fit_points(&fit_pts, t)?;
        table.meta.push(("scaling_slope".into(), fmt_f64(fit.slope)));
        table.meta.push(("scaling_slope_se".into(), fmt_f64(fit.se)));
        fit_json = to_json(&fit)?;
    }
    Ok(RunOutput {
        kind: ExperimentKind::Sweep,
        table,
        json: json!({ "cells": json_cells, "scaling_slope": fit_json }),
        check: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCheckReport {
    pub steps: usize,
    pub samples: usize,
    pub tv: f64,
    pub tv_tolerance: f64,
    pub exact_regret: f64,
    pub simulated_regret: f64,
    pub simulated_se: f64,
    pub regret_trials: usize,
    pub tv_pass: bool,
    pub regret_pass: bool,
}

/// Exact law of `d^t` against `samples` simulated runs, plus exact regret
/// against a `trials`-trial estimate (within 3 standard errors).
fn oracle_check(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let p = &cfg.params;
    let mut dist = StateDistribution::initial(cfg.n, p.m())?;
    for _ in 0..cfg.t {
        dist = exact_step(&dist, p)?;
    }
    let emp = empirical_distribution(p, cfg.n, cfg.t, cfg.samples, cfg.seed)?;
    let tv = tv_distance(&dist, &emp);
    let exact = exact_regret(p, cfg.n, cfg.t)?;
    let sim = estimate_regret(
        &spec(cfg, Process::Finite(crate::finite::Engine::Count), Recording::Summary),
        cfg.trials,
        workers,
    )?;
    let gap = (exact - sim.regret_mean).abs();
    let report = OracleCheckReport {
        steps: cfg.t,
        samples: cfg.samples,
        tv,
        tv_tolerance: cfg.tv_tolerance,
        exact_regret: exact,
        simulated_regret: sim.regret_mean,
        simulated_se: sim.regret_se,
        regret_trials: cfg.trials,
        tv_pass: tv < cfg.tv_tolerance,
        regret_pass: gap <= 3.0 * sim.regret_se + 1e-12,
    };
    let mut cols: Vec<String> = (1..=p.m()).map(|j| format!("d_{j}")).collect();
    cols.push("probability".into());
    cols.push("empirical".into());
    let mut table = Table::new(cols);
    let mut keys: Vec<&Vec<u64>> = dist.probs.keys().chain(emp.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let mut row: Vec<String> = k.iter().map(u64::to_string).collect();
        row.push(fmt_f64(dist.prob(k)));
        row.push(fmt_f64(emp.get(k).copied().unwrap_or(0.0)));
        table.push(row);
    }
    for (k, v) in [
        ("tv", fmt_f64(tv)),
        ("exact_regret", fmt_f64(exact)),
        ("simulated_regret", fmt_f64(sim.regret_mean)),
        ("simulated_se", fmt_f64(sim.regret_se)),
    ] {
        table.meta.push((k.to_string(), v));
    }
    let passed = report.tv_pass && report.regret_pass;
    let detail = format!(
        "tv = {tv:.6} (limit {}), exact regret {exact:.6} vs simulated {:.6} +- {:.6}",
        cfg.tv_tolerance, sim.regret_mean, sim.regret_se
    );
    Ok(RunOutput {
        kind: ExperimentKind::OracleCheck,
        table,
        json: to_json(&report)?,
        check: Some(CheckOutcome { passed, detail }),
    })
}

/// Random parameters for audit trajectories: `m` in `2..=10`, descending
/// qualities, `mu` in `[0.001, 0.5)`, `beta` in `[0.5, 0.95)`, and half the
/// time a free `alpha` in `[0.01, beta)`.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R) -> ModelParams {
    let m = rng.random_range(2..=10usize);
    let mut eta: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    eta.sort_by(|a, b| b.total_cmp(a));
    let mu = rng.random_range(0.001..0.5);
    let beta = rng.random_range(0.5..0.95);
    let alpha = if rng.random::<bool>() {
        1.0 - beta
    } else {
        rng.random_range(0.01..beta)
    };
    ModelParams::new(eta, mu, beta, alpha).expect("sampled parameters are valid")
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditRecord {
    pub trial: usize,
    pub prefix: usize,
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub pass: bool,
}

/// Potential audit over `trials` infinite-process trajectories of length
/// `t`; with `randomize` each trajectory draws its own parameters.
fn audit(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let audits = crate::trials::map_trials(workers, cfg.trials, |i| -> Result<_> {
        let params = if cfg.randomize {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(split_seed(cfg.seed, i as u64), 2));
            random_params(&mut rng)
        } else {
            cfg.params.clone()
        };
        let mut s = TrialSpec::new(Process::Infinite, &params, cfg.n, cfg.t, cfg.seed);
        if !cfg.randomize {
            s.start = cfg.p0.as_deref();
        }
        let rec: TrialRecord = s.run(i as u64)?;
        Ok(audit_potential(&rec, &params))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(["trial", "prefix", "lower_slack", "upper_slack", "pass"]);
    let mut records = Vec::new();
    let mut violations = 0;
    let mut skipped = 0;
    for (i, a) in audits.iter().enumerate() {
        if !a.applicable {
            skipped += 1;
        }
        for l in &a.lines {
            if !l.pass {
                violations += 1;
            }
            table.push(vec![
                i.to_string(),
                l.prefix.to_string(),
                fmt_f64(l.lower_slack),
                fmt_f64(l.upper_slack),
                l.pass.to_string(),
            ]);
            records.push(AuditRecord {
                trial: i,
                prefix: l.prefix,
                lower_slack: l.lower_slack,
                upper_slack: l.upper_slack,
                pass: l.pass,
            });
        }
    }
    table.meta.push(("violations".into(), violations.to_string()));
    table.meta.push(("not_applicable".into(), skipped.to_string()));
    let passed = violations == 0 && skipped < audits.len();
    Ok(RunOutput {
        kind: ExperimentKind::Audit,
        table,
        json: json!({ "violations": violations, "not_applicable": skipped, "records": records }),
        check: Some(CheckOutcome {
            passed,
            detail: format!(
                "{violations} violations over {} trajectories ({skipped} not applicable)",
                audits.len()
            ),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::output::csv_body;

    /// Base config with `extra` lines overriding.
    fn cfg(extra: &str) -> ExperimentConfig {
        let base = "eta = 0.7,0.3\nmu = 0.1\nbeta = 0.6\nn = 1000\nt = 20\ntrials = 16\nseed = 3\n";
        let mut pairs = crate::experiment::config::parse_pairs(base).unwrap();
        pairs.extend(crate::experiment::config::parse_pairs(extra).unwrap());
        ExperimentConfig::from_pairs(&pairs).unwrap()
    }

    fn csv(c: &ExperimentConfig, kind: ExperimentKind, workers: usize) -> String {
        run(c, kind, workers).unwrap().render(c, Format::Csv).unwrap()
    }

    #[test]
    fn simulate_trajectory_schema() {
        let c = cfg("mode = finite\ntrace_stride = 5\n");
        let out = run(&c, ExperimentKind::Simulate, 1).unwrap();
        assert_eq!(out.table.columns, TRAJECTORY_COLUMNS);
        // t = 5, 10, 15, 20 for two options
        assert_eq!(out.table.rows.len(), 8);
        let t = Table::from_csv(&out.render(&c, Format::Csv).unwrap()).unwrap();
        assert_eq!(t.meta("config.mode"), Some("finite"));
        let s: u64 = (0..2).map(|r| t.get(r, "S_j").unwrap().parse::<u64>().unwrap()).sum();
        assert_eq!(s, 1000);
    }

    #[test]
    fn simulate_infinite_leaves_counts_empty() {
        let c = cfg("mode = infinite\n");
        let out = run(&c, ExperimentKind::Simulate, 1).unwrap();
        assert_eq!(out.table.get(0, "S_j"), Some(""));
        assert_eq!(out.table.get(0, "D_j"), Some(""));
    }

    #[test]
    fn coupled_simulation_adds_limit_column() {
        let c = cfg("mode = coupled\n");
        let out = run(&c, ExperimentKind::Simulate, 1).unwrap();
        assert_eq!(out.table.columns.last().map(String::as_str), Some("P_j"));
        assert_eq!(out.table.rows.len(), 40);
    }

    #[test]
    fn regret_row_columns() {
        let c = cfg("mode = infinite\n");
        let out = run(&c, ExperimentKind::Regret, 1).unwrap();
        assert_eq!(out.table.columns, REGRET_COLUMNS);
        assert_eq!(out.table.get(0, "bound_name"), Some("infinite-3delta"));
        assert_eq!(out.table.get(0, "trials"), Some("16"));
    }

    #[test]
    fn outputs_independent_of_workers() {
        for (extra, kind) in [
            ("mode = finite\n", ExperimentKind::Regret),
            ("mode = coupled\nn_values = 100,1000\nt = 3\n", ExperimentKind::Couple),
            ("mode = infinite\nrandomize = true\nt = 30\n", ExperimentKind::Audit),
        ] {
            let c = cfg(extra);
            assert_eq!(csv(&c, kind, 1), csv(&c, kind, 3));
        }
    }

    #[test]
    fn sweep_cells_and_seeds() {
        let c = cfg("mode = infinite\nsweep_x = beta\nsweep_x_values = 0.55,0.6,0.7\n");
        let out = run(&c, ExperimentKind::Sweep, 1).unwrap();
        assert_eq!(out.table.rows.len(), 3);
        assert_eq!(out.table.get(2, "axis_beta"), Some("0.7"));
        assert_eq!(out.table.get(2, "beta"), Some("0.7"));
        assert_eq!(out.table.get(1, "seed"), Some(split_seed(3, 1).to_string().as_str()));
        // empty axis list is a single run
        let single = run(&cfg("mode = infinite\n"), ExperimentKind::Sweep, 1).unwrap();
        assert_eq!(single.table.rows.len(), 1);
    }

    #[test]
    fn coupled_sweep_over_population_fits_slope() {
        let c = cfg("mode = coupled\nt = 3\ntrials = 40\nfit_t = 3\nsweep_x = n\nsweep_x_values = 1000,10000,100000\n");
        let out = run(&c, ExperimentKind::Sweep, 1).unwrap();
        let slope: f64 = out.table.meta("scaling_slope").unwrap().parse().unwrap();
        assert!((-0.8..-0.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn low_starts_need_exploratory_mode() {
        let c = cfg("mode = infinite\np0 = 0.9999,0.0001\n");
        assert!(matches!(run(&c, ExperimentKind::Regret, 1), Err(Error::Config(_))));
        assert!(run(&c, ExperimentKind::Simulate, 1).is_ok());
        let c = cfg("mode = infinite\np0 = 0.9999,0.0001\nexploratory = true\n");
        assert!(run(&c, ExperimentKind::Regret, 1).is_ok());
        let c = cfg("mode = infinite\np0 = 0.9,0.1\n");
        assert!(run(&c, ExperimentKind::Regret, 1).is_ok());
    }

    #[test]
    fn exact_mode_regret_row() {
        let c = cfg("mode = oracle\nn = 3\nt = 2\n");
        let out = run(&c, ExperimentKind::Regret, 1).unwrap();
        assert_eq!(out.table.get(0, "process"), Some("exact"));
    }

    #[test]
    fn oracle_check_passes_on_small_instance() {
        let c = ExperimentConfig::parse(
            "eta = 1,0\nmu = 0.2\nbeta = 0.75\nalpha = 0.25\nn = 3\nt = 1\ntrials = 2000\nsamples = 100000\ntv_tolerance = 0.01\n",
        )
        .unwrap();
        let out = run(&c, ExperimentKind::OracleCheck, 1).unwrap();
        assert!(out.check.as_ref().unwrap().passed, "{:?}", out.check);
        assert_eq!(out.table.columns, ["d_1", "d_2", "probability", "empirical"]);
    }

    #[test]
    fn audit_flags_and_records() {
        let c = cfg("mode = infinite\nt = 50\n");
        let out = run(&c, ExperimentKind::Audit, 1).unwrap();
        assert!(out.check.unwrap().passed);
        assert_eq!(out.table.rows.len(), 16 * 50);
        let zero_alpha = cfg("mode = infinite\nalpha = 0\n");
        assert!(!run(&zero_alpha, ExperimentKind::Audit, 1).unwrap().check.unwrap().passed);
    }

    #[test]
    fn json_render_embeds_config() {
        let c = cfg("mode = infinite\n");
        let text = run(&c, ExperimentKind::Regret, 1).unwrap().render(&c, Format::Json).unwrap();
        let doc = JsonDoc::parse(&text).unwrap();
        assert!(doc.config.contains(&("beta".to_string(), "0.6".to_string())));
        assert_eq!(doc.result["bound_name"], "infinite-3delta");
    }

    #[test]
    fn same_seed_same_body() {
        let c = cfg("mode = finite\n");
        let a = csv(&c, ExperimentKind::Simulate, 1);
        let b = csv(&c, ExperimentKind::Simulate, 1);
        assert_eq!(csv_body(&a), csv_body(&b));
        let other = csv(&c.with_value("seed", "4").unwrap(), ExperimentKind::Simulate, 1);
        assert_ne!(csv_body(&a), csv_body(&other));
    }
}
