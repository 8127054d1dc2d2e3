//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma separated.
//! Unknown or repeated keys are errors. `eta`, `mu` and `beta` are required;
//! everything else has a default (see [`KEYS`]).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::finite::Engine;
use crate::params::{ModelParams, DELTA_PP_CONSTANT};
use crate::rewards::RewardMode;

/// Every accepted key with its default (`None` = required or unset).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("experiment", None),
    ("mode", Some("infinite")),
    ("m", None),
    ("eta", None),
    ("mu", None),
    ("beta", None),
    ("alpha", None),
    ("n", Some("10000")),
    ("t", Some("100")),
    ("trials", Some("100")),
    ("seed", Some("0")),
    ("engine", Some("count")),
    ("reward_mode", Some("independent")),
    ("p0", None),
    ("epochs", Some("0")),
    ("delta_pp_constant", Some("60")),
    ("n_values", None),
    ("fit_t", None),
    ("samples", Some("1000000")),
    ("tv_tolerance", Some("0.005")),
    ("randomize", Some("false")),
    ("exploratory", Some("false")),
    ("trace_stride", Some("1")),
    ("sweep_x", None),
    ("sweep_x_values", None),
    ("sweep_y", None),
    ("sweep_y_values", None),
    ("output", None),
    ("format", Some("csv")),
];

/// Keys a sweep axis may vary.
pub const SWEEPABLE: &[&str] = &["mu", "beta", "alpha", "n", "t", "trials", "epochs"];

pub const MAX_SWEEP_CELLS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Finite,
    Infinite,
    Coupled,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    Regret,
    Couple,
    Sweep,
    OracleCheck,
    Audit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($name:literal => $v:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $v { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(Mode, "mode",
    "finite" => Mode::Finite, "infinite" => Mode::Infinite,
    "coupled" => Mode::Coupled, "oracle" => Mode::Oracle);
keyword_enum!(ExperimentKind, "experiment",
    "simulate" => ExperimentKind::Simulate, "regret" => ExperimentKind::Regret,
    "couple" => ExperimentKind::Couple, "sweep" => ExperimentKind::Sweep,
    "oracle-check" => ExperimentKind::OracleCheck, "audit" => ExperimentKind::Audit);
keyword_enum!(Format, "format", "csv" => Format::Csv, "json" => Format::Json);

fn parse_engine(s: &str) -> Result<Engine> {
    match s {
        "count" => Ok(Engine::Count),
        "agent" => Ok(Engine::Agent),
        _ => Err(Error::Config(format!("unknown engine '{s}'"))),
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Count => "count",
        Engine::Agent => "agent",
    }
}

fn parse_reward_mode(s: &str) -> Result<RewardMode> {
    match s {
        "independent" => Ok(RewardMode::Independent),
        "coupled-binary" => Ok(RewardMode::CoupledBinary),
        _ => Err(Error::Config(format!("unknown reward_mode '{s}'"))),
    }
}

fn reward_mode_name(r: RewardMode) -> &'static str {
    match r {
        RewardMode::Independent => "independent",
        RewardMode::CoupledBinary => "coupled-binary",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub mode: Mode,
    pub params: ModelParams,
    pub n: u64,
    pub t: usize,
    pub trials: usize,
    pub seed: u64,
    pub engine: Engine,
    pub reward_mode: RewardMode,
    pub p0: Option<Vec<f64>>,
    pub epochs: usize,
    pub delta_pp_constant: f64,
    pub n_values: Vec<u64>,
    pub fit_t: Option<usize>,
    pub samples: usize,
    pub tv_tolerance: f64,
    pub randomize: bool,
    /// Allows regret runs from a start below the popularity floor.
    pub exploratory: bool,
    pub trace_stride: usize,
    pub sweep: Vec<SweepAxis>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Splits the text into raw assignments, rejecting unknown and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.iter().any(|(name, _)| *name == k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

/// Integers also accept scientific notation such as `1e5`.
fn count(key: &str, v: &str) -> Result<u64> {
    if let Ok(x) = v.parse::<u64>() {
        return Ok(x);
    }
    let f: f64 = num(key, v)?;
    if f >= 0.0 && f.fract() == 0.0 && f < 2f64.powi(63) {
        Ok(f as u64)
    } else {
        Err(Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
    }
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = pairs.keys().find(|k| !KEYS.iter().any(|(n, _)| n == k)) {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
        let get = |key: &str| -> Option<&str> {
            pairs
                .get(key)
                .map(String::as_str)
                .or_else(|| KEYS.iter().find(|(n, _)| *n == key).and_then(|(_, d)| *d))
        };
        let need = |key: &str| get(key).ok_or_else(|| Error::Config(format!("missing required key '{key}'")));

        let eta: Vec<f64> = list("eta", need("eta")?, num)?;
        if let Some(m) = get("m") {
            let m: usize = num("m", m)?;
            if m != eta.len() {
                return Err(Error::Config(format!("m = {m} but eta has {} entries", eta.len())));
            }
        }
        let mu: f64 = num("mu", need("mu")?)?;
        let beta: f64 = num("beta", need("beta")?)?;
        let alpha: f64 = match get("alpha") {
            Some(a) => num("alpha", a)?,
            None => 1.0 - beta,
        };
        let params = ModelParams::new(eta, mu, beta, alpha)
            .map_err(|e| Error::Config(e.to_string()))?;

        let n = count("n", need("n")?)?;
        let n_values = match get("n_values") {
            Some(v) => list("n_values", v, count)?,
            None => vec![n],
        };
        let mut sweep = Vec::new();
        for axis in ["x", "y"] {
            let key = format!("sweep_{axis}");
            let vkey = format!("sweep_{axis}_values");
            match (get(&key), get(&vkey)) {
                (None, None) => {}
                (Some(k), Some(v)) => {
                    if !SWEEPABLE.contains(&k) {
                        return Err(Error::Config(format!("{key}: cannot sweep '{k}'")));
                    }
                    let values: Vec<String> =
                        v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
                    if values.is_empty() {
                        return Err(Error::Config(format!("{vkey} is empty")));
                    }
                    sweep.push(SweepAxis { key: k.to_string(), values });
                }
                _ => return Err(Error::Config(format!("{key} and {vkey} must be given together"))),
            }
        }
        if sweep.len() == 2 && sweep[0].key == sweep[1].key {
            return Err(Error::Config("sweep axes must differ".to_string()));
        }
        let cells: usize = sweep.iter().map(|a| a.values.len()).product();
        if cells > MAX_SWEEP_CELLS {
            return Err(Error::Config(format!("{cells} sweep cells exceed {MAX_SWEEP_CELLS}")));
        }

        let trace_stride: usize = num("trace_stride", need("trace_stride")?)?;
        if trace_stride == 0 {
            return Err(Error::Config("trace_stride must be positive".to_string()));
        }
        let flag = |key: &str| -> Result<bool> {
            match need(key)? {
                "true" => Ok(true),
                "false" => Ok(false),
                v => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
            }
        };

        Ok(Self {
            experiment: get("experiment").map(str::parse).transpose()?,
            mode: need("mode")?.parse()?,
            params,
            n,
            t: count("t", need("t")?)? as usize,
            trials: count("trials", need("trials")?)? as usize,
            seed: num("seed", need("seed")?)?,
            engine: parse_engine(need("engine")?)?,
            reward_mode: parse_reward_mode(need("reward_mode")?)?,
            p0: get("p0").map(|v| list("p0", v, num)).transpose()?,
            epochs: count("epochs", need("epochs")?)? as usize,
            delta_pp_constant: num("delta_pp_constant", need("delta_pp_constant")?)?,
            n_values,
            fit_t: get("fit_t").map(|v| num("fit_t", v)).transpose()?,
            samples: count("samples", need("samples")?)? as usize,
            tv_tolerance: num("tv_tolerance", need("tv_tolerance")?)?,
            randomize: flag("randomize")?,
            exploratory: flag("exploratory")?,
            trace_stride,
            sweep,
            output: get("output").map(PathBuf::from),
            format: need("format")?.parse()?,
        })
    }

    /// The fully resolved configuration, one `(key, value)` per accepted key
    /// that has a value, in [`KEYS`] order.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut out: Vec<(&str, String)> = Vec::new();
        if let Some(e) = self.experiment {
            out.push(("experiment", e.to_string()));
        }
        out.push(("mode", self.mode.to_string()));
        out.push(("m", p.m().to_string()));
        out.push(("eta", join(p.eta())));
        out.push(("mu", p.mu().to_string()));
        out.push(("beta", p.beta().to_string()));
        out.push(("alpha", p.alpha().to_string()));
        out.push(("n", self.n.to_string()));
        out.push(("t", self.t.to_string()));
        out.push(("trials", self.trials.to_string()));
        out.push(("seed", self.seed.to_string()));
        out.push(("engine", engine_name(self.engine).to_string()));
        out.push(("reward_mode", reward_mode_name(self.reward_mode).to_string()));
        if let Some(p0) = &self.p0 {
            out.push(("p0", join(p0)));
        }
        out.push(("epochs", self.epochs.to_string()));
        out.push(("delta_pp_constant", self.delta_pp_constant.to_string()));
        out.push(("n_values", join(&self.n_values)));
        if let Some(t) = self.fit_t {
            out.push(("fit_t", t.to_string()));
        }
        out.push(("samples", self.samples.to_string()));
        out.push(("tv_tolerance", self.tv_tolerance.to_string()));
        out.push(("randomize", self.randomize.to_string()));
        out.push(("exploratory", self.exploratory.to_string()));
        out.push(("trace_stride", self.trace_stride.to_string()));
        for (axis, a) in ["x", "y"].iter().zip(&self.sweep) {
            out.push((if *axis == "x" { "sweep_x" } else { "sweep_y" }, a.key.clone()));
            out.push((
                if *axis == "x" { "sweep_x_values" } else { "sweep_y_values" },
                a.values.join(","),
            ));
        }
        if let Some(o) = &self.output {
            out.push(("output", o.display().to_string()));
        }
        out.push(("format", self.format.to_string()));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Renders [`Self::resolved`] back into config-file syntax.
    pub fn to_text(&self) -> String {
        self.resolved()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// A copy with one key replaced, re-validated from scratch. Used for
    /// sweep cells and command-line overrides.
    pub fn with_value(&self, key: &str, value: &str) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = self.resolved().into_iter().collect();
        if key == "beta" && !self.alpha_is_free() {
            pairs.remove("alpha");
        }
        pairs.insert(key.to_string(), value.to_string());
        if key == "n" {
            pairs.remove("n_values");
        }
        Self::from_pairs(&pairs)
    }

    fn alpha_is_free(&self) -> bool {
        !self.params.is_symmetric()
    }

    /// All sweep cells in row-major order (first axis slowest) as
    /// `(assignments, config)`. No axes gives a single cell.
    pub fn cells(&self) -> Result<Vec<(Vec<(String, String)>, ExperimentConfig)>> {
        let mut cells = vec![(Vec::new(), self.clone())];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(cells.len() * axis.values.len());
            for (assigned, cfg) in &cells {
                for v in &axis.values {
                    let mut a = assigned.clone();
                    a.push((axis.key.clone(), v.clone()));
                    next.push((a, cfg.with_value(&axis.key, v)?));
                }
            }
            cells = next;
        }
        for (_, c) in &mut cells {
            c.sweep.clear();
        }
        Ok(cells)
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let params = ModelParams::symmetric(vec![0.7, 0.3], 0.1, 0.6).expect("valid defaults");
        Self {
            experiment: None,
            mode: Mode::Infinite,
            params,
            n: 10_000,
            t: 100,
            trials: 100,
            seed: 0,
            engine: Engine::Count,
            reward_mode: RewardMode::Independent,
            p0: None,
            epochs: 0,
            delta_pp_constant: DELTA_PP_CONSTANT,
            n_values: vec![10_000],
            fit_t: None,
            samples: 1_000_000,
            tv_tolerance: 0.005,
            randomize: false,
            exploratory: false,
            trace_stride: 1,
            sweep: Vec::new(),
            output: None,
            format: Format::Csv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# reference run
m = 10
eta = 0.95, 0.05,0.05,0.05,0.05,0.05,0.05,0.05,0.05,0.05
mu = 0.0067
beta = 0.55   # delta = ln(11/9)
t = 58
trials = 2000
seed = 7
mode = infinite
";

    #[test]
    fn parses_reference_config() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.params.m(), 10);
        assert_eq!(c.params.eta()[0], 0.95);
        assert!((c.params.alpha() - 0.45).abs() < 1e-15);
        assert_eq!((c.t, c.trials, c.seed), (58, 2000, 7));
        assert_eq!(c.mode, Mode::Infinite);
        assert_eq!(c.n, 10_000);
        assert_eq!(c.n_values, vec![10_000]);
        assert_eq!(c.format, Format::Csv);
        assert!(c.sweep.is_empty());
    }

    #[test]
    fn resolved_text_round_trips() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        let again = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_text(), again.to_text());
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "eta = 0.5,0.5\nmu = 0.1\n",
            "mu = 0.1\nbeta = 0.6\n",
            "eta = 0.5,0.5\nmu = 0.1\nbeta = 0.6\ncolour = red\n",
            "eta = 0.5,0.5\nmu = 0.1\nbeta = 0.6\nbeta = 0.7\n",
            "eta = 0.5,0.5\nmu = 0.1\nbeta = 0.6\nm = 3\n",
            "eta = 0.5,0.5\nmu = 0.1\nbeta = 0.6\nmode = quantum\n",
            "eta = 0.5,0.5\nmu = 0.1\nbeta = 0.6\nsweep_x = eta\nsweep_x_values = 1\n",
            "eta = 0.5,0.5\nmu = 0.1\nbeta = 0.6\nsweep_x = mu\n",
            "eta = 0.5,0.5\nmu = 0.1\nbeta = 0.6 0.7\n",
            "eta = 0.5,0.5\nmu = 2\nbeta = 0.6\n",
            "just a line\n",
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(Error::Config(_))),
                "accepted: {text:?}"
            );
        }
    }

    #[test]
    fn scientific_counts() {
        let c = ExperimentConfig::parse("eta=0.7,0.3\nmu=0.1\nbeta=0.6\nn=1e5\nn_values=1e3,1e4,1e5\n")
            .unwrap();
        assert_eq!(c.n, 100_000);
        assert_eq!(c.n_values, vec![1_000, 10_000, 100_000]);
    }

    #[test]
    fn sweep_cells_are_row_major() {
        let text = format!("{BASE}sweep_x = beta\nsweep_x_values = 0.55,0.6\nsweep_y = n\nsweep_y_values = 10,20,30\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        let cells = c.cells().unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1].0, vec![("beta".into(), "0.55".into()), ("n".into(), "20".into())]);
        assert_eq!(cells[3].1.params.beta(), 0.6);
        // symmetric rule follows the swept beta
        assert!((cells[3].1.params.alpha() - 0.4).abs() < 1e-15);
        assert_eq!(cells[5].1.n, 30);
        assert!(cells.iter().all(|(_, c)| c.sweep.is_empty()));
    }

    #[test]
    fn explicit_alpha_survives_beta_sweep() {
        let c = ExperimentConfig::parse("eta=0.7,0.3\nmu=0.1\nbeta=0.6\nalpha=0.1\n").unwrap();
        let d = c.with_value("beta", "0.8").unwrap();
        assert_eq!(d.params.alpha(), 0.1);
    }

    #[test]
    fn no_axes_is_single_cell() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        let cells = c.cells().unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].1, c);
    }

    #[test]
    fn cell_limit() {
        let many: Vec<String> = (0..101).map(|i| i.to_string()).collect();
        let text = format!(
            "{BASE}sweep_x = n\nsweep_x_values = {0}\nsweep_y = t\nsweep_y_values = {0}\n",
            many.join(",")
        );
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
