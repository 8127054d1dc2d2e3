use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use social_mwu::experiment::{self, ExperimentConfig, ExperimentKind};
use social_mwu::trials::default_workers;
use social_mwu::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "social-mwu", version, about = "Imitation dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record one trajectory (finite, infinite or coupled mode)
    Simulate(Common),
    /// Monte Carlo regret estimate with its theoretical bound
    Regret(Common),
    /// Finite vs infinite coupling deviations over `n_values`
    Couple(Common),
    /// Cartesian sweep over up to two config keys
    Sweep(Common),
    /// Exact small-instance law vs simulation (exit 3 on mismatch)
    OracleCheck(Common),
    /// Log-potential audit of infinite trajectories (exit 3 on violation)
    Audit(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (key = value per line)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config mode (finite, infinite, coupled, oracle)
    #[arg(long)]
    mode: Option<String>,
    /// Output path; stdout when absent from both flag and config
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Trial worker threads; results do not depend on this
    #[arg(long)]
    workers: Option<usize>,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::Config(_) => (EXIT_CONFIG, "config"),
            Error::InvalidParams(_) => (EXIT_CONFIG, "invalid-params"),
            Error::SizeLimit(_) => (EXIT_CONFIG, "size-limit"),
            Error::HorizonExhausted { .. } => (EXIT_RUNTIME, "horizon"),
            Error::InsufficientData(_) => (EXIT_RUNTIME, "insufficient-data"),
            Error::Schema(_) => (EXIT_RUNTIME, "schema"),
            Error::Trace(_) => (EXIT_RUNTIME, "trace"),
            Error::Io(_) => (EXIT_RUNTIME, "io"),
            Error::Json(_) => (EXIT_RUNTIME, "json"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn load(args: &Common) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Failure {
        code: EXIT_CONFIG,
        kind: "config",
        message: format!("{}: {e}", args.config.display()),
    })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_value("seed", &seed.to_string())?;
    }
    if let Some(mode) = &args.mode {
        cfg = cfg.with_value("mode", mode)?;
    }
    if let Some(f) = &args.format {
        cfg.format = f.parse()?;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn execute(kind: ExperimentKind, args: &Common) -> Result<u8, Failure> {
    let mut cfg = load(args)?;
    cfg.experiment = Some(kind);
    let workers = args.workers.unwrap_or_else(default_workers).max(1);
    let started = Instant::now();
    let out = experiment::run(&cfg, kind, workers)?;
    let text = out.render(&cfg, cfg.format)?;
    match &cfg.output {
        Some(path) => {
            experiment::write_atomic(path, &text)?;
            experiment::write_sidecar(path, started.elapsed().as_millis(), workers)?;
        }
        None => print!("{text}"),
    }
    match out.check {
        Some(c) if !c.passed => {
            eprintln!("{}", json!({ "check": "failed", "detail": c.detail }));
            Ok(EXIT_CHECK)
        }
        Some(c) => {
            eprintln!("{}", json!({ "check": "passed", "detail": c.detail }));
            Ok(0)
        }
        None => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let (kind, args) = match &cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Regret(a) => (ExperimentKind::Regret, a),
        Command::Couple(a) => (ExperimentKind::Couple, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::OracleCheck(a) => (ExperimentKind::OracleCheck, a),
        Command::Audit(a) => (ExperimentKind::Audit, a),
    };
    match execute(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!(
                "{}",
                json!({ "error": f.kind, "message": f.message, "exit_code": f.code })
            );
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::Config("x".into())).code, EXIT_CONFIG);
        assert_eq!(Failure::from(Error::InsufficientData("x".into())).code, EXIT_RUNTIME);
    }
}
