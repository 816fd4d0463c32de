//! Experiment configuration: command-line flags layered over an optional
//! flat JSON file, layered over the reference setup
//! (`T = 0.02`, `τ = 0.01`, `Ω = (0,1)`, `ω = (0.3, 0.7)`, `n_x = 25`).

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::{Map, Value};

use crate::error::{HumError, Result};
use crate::grid::BcKind;
use crate::operators::{PropagatorScheme, DEFAULT_CN_DT};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `√2 sin(πx)`.
    Sine,
    Constant(f64),
    Custom(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub bcs: Vec<BcKind>,
    pub final_time: f64,
    pub tau: f64,
    pub omega: (f64, f64),
    pub domain: (f64, f64),
    pub n_x: usize,
    pub eps_list: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: PropagatorScheme,
    pub initial_datum: InitialDatum,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub fit_cost: bool,
    pub snapshots: usize,
    /// Write measured wall times into `table.csv` (otherwise 0, keeping files byte-stable).
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            bcs: BcKind::ALL.to_vec(),
            final_time: 0.02,
            tau: 0.01,
            omega: (0.3, 0.7),
            domain: (0.0, 1.0),
            n_x: 25,
            eps_list: vec![1e-1, 1e-2, 1e-3],
            tol: 1e-3,
            max_iter: crate::hum::DEFAULT_MAX_ITER,
            scheme: PropagatorScheme::MatrixExponential,
            initial_datum: InitialDatum::Sine,
            seed: 0,
            output_dir: None,
            fit_cost: false,
            snapshots: 41,
            record_timing: false,
        }
    }
}

/// Command-line flags. Every flag is optional; unset flags fall back to the
/// JSON config (if any), then to the defaults.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "impulse-hum",
    version,
    about = "Penalized HUM impulse controls for the 1-D heat equation"
)]
pub struct CliArgs {
    /// Boundary condition: dirichlet, neumann, dynamic or all
    #[arg(long)]
    pub bc: Option<String>,
    /// Final time T
    #[arg(long = "T")]
    pub final_time: Option<f64>,
    /// Impulse instant tau, 0 < tau < T
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "omega-start")]
    pub omega_start: Option<f64>,
    #[arg(long = "omega-end")]
    pub omega_end: Option<f64>,
    /// Number of spatial subintervals
    #[arg(long)]
    pub nx: Option<usize>,
    /// Comma-separated, strictly decreasing penalization values
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eps: Option<Vec<f64>>,
    /// Relative residual stopping threshold
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Propagator: cn (Crank-Nicolson) or expm (matrix exponential)
    #[arg(long)]
    pub scheme: Option<String>,
    /// Crank-Nicolson time step
    #[arg(long)]
    pub dt: Option<f64>,
    /// Initial datum: sine, constant:<c> or file:<path>
    #[arg(long)]
    pub datum: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for CSV files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file with the same (kebab-case) keys as the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fit the control-norm blow-up exponent per boundary condition
    #[arg(long = "fit-cost")]
    pub fit_cost: bool,
    /// Number of uniform trajectory snapshots (tau-, tau and T are always added)
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// Record wall times in table.csv
    #[arg(long)]
    pub timing: bool,
}

/// Raw values before validation; flag and file layers both write into it.
#[derive(Debug, Default)]
struct Layer {
    bc: Option<String>,
    final_time: Option<f64>,
    tau: Option<f64>,
    omega_start: Option<f64>,
    omega_end: Option<f64>,
    nx: Option<usize>,
    eps: Option<Vec<f64>>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    scheme: Option<String>,
    dt: Option<f64>,
    datum: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    fit_cost: Option<bool>,
    snapshots: Option<usize>,
    timing: Option<bool>,
}

impl Layer {
    fn overlay(self, top: Layer) -> Layer {
        Layer {
            bc: top.bc.or(self.bc),
            final_time: top.final_time.or(self.final_time),
            tau: top.tau.or(self.tau),
            omega_start: top.omega_start.or(self.omega_start),
            omega_end: top.omega_end.or(self.omega_end),
            nx: top.nx.or(self.nx),
            eps: top.eps.or(self.eps),
            tol: top.tol.or(self.tol),
            max_iter: top.max_iter.or(self.max_iter),
            scheme: top.scheme.or(self.scheme),
            dt: top.dt.or(self.dt),
            datum: top.datum.or(self.datum),
            seed: top.seed.or(self.seed),
            out: top.out.or(self.out),
            fit_cost: top.fit_cost.or(self.fit_cost),
            snapshots: top.snapshots.or(self.snapshots),
            timing: top.timing.or(self.timing),
        }
    }
}

impl From<&CliArgs> for Layer {
    fn from(a: &CliArgs) -> Self {
        Layer {
            bc: a.bc.clone(),
            final_time: a.final_time,
            tau: a.tau,
            omega_start: a.omega_start,
            omega_end: a.omega_end,
            nx: a.nx,
            eps: a.eps.clone(),
            tol: a.tol,
            max_iter: a.max_iter,
            scheme: a.scheme.clone(),
            dt: a.dt,
            datum: a.datum.clone(),
            seed: a.seed,
            out: a.out.clone(),
            fit_cost: a.fit_cost.then_some(true),
            snapshots: a.snapshots,
            timing: a.timing.then_some(true),
        }
    }
}

fn file_err(path: &Path, message: impl Into<String>) -> HumError {
    HumError::ConfigFile {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn json_f64(path: &Path, key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| file_err(path, format!("'{key}' is not a number"))),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| file_err(path, format!("'{key}' is not a number: {s}"))),
        _ => Err(file_err(path, format!("'{key}' must be a number"))),
    }
}

fn json_uint(path: &Path, key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| file_err(path, format!("'{key}' must be a non-negative integer"))),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| file_err(path, format!("'{key}' must be a non-negative integer: {s}"))),
        _ => Err(file_err(path, format!("'{key}' must be an integer"))),
    }
}

fn json_string(path: &Path, key: &str, v: &Value) -> Result<String> {
    v.as_str()
        .map(str::to_owned)
        .ok_or_else(|| file_err(path, format!("'{key}' must be a string")))
}

fn json_bool(path: &Path, key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| file_err(path, format!("'{key}' must be a boolean")))
}

fn layer_from_json(path: &Path, map: &Map<String, Value>) -> Result<Layer> {
    let mut layer = Layer::default();
    for (key, v) in map {
        match key.as_str() {
            "bc" => layer.bc = Some(json_string(path, key, v)?),
            "T" => layer.final_time = Some(json_f64(path, key, v)?),
            "tau" => layer.tau = Some(json_f64(path, key, v)?),
            "omega-start" => layer.omega_start = Some(json_f64(path, key, v)?),
            "omega-end" => layer.omega_end = Some(json_f64(path, key, v)?),
            "nx" => layer.nx = Some(json_uint(path, key, v)? as usize),
            "eps" => {
                let list = match v {
                    Value::Array(items) => items.iter().map(|x| json_f64(path, key, x)).collect::<Result<Vec<_>>>()?,
                    Value::String(s) => parse_eps_list(s).map_err(|e| file_err(path, e.to_string()))?,
                    other => vec![json_f64(path, key, other)?],
                };
                layer.eps = Some(list);
            }
            "tol" => layer.tol = Some(json_f64(path, key, v)?),
            "max-iter" => layer.max_iter = Some(json_uint(path, key, v)? as usize),
            "scheme" => layer.scheme = Some(json_string(path, key, v)?),
            "dt" => layer.dt = Some(json_f64(path, key, v)?),
            "datum" => layer.datum = Some(json_string(path, key, v)?),
            "seed" => layer.seed = Some(json_uint(path, key, v)?),
            "out" => layer.out = Some(PathBuf::from(json_string(path, key, v)?)),
            "fit-cost" => layer.fit_cost = Some(json_bool(path, key, v)?),
            "snapshots" => layer.snapshots = Some(json_uint(path, key, v)? as usize),
            "timing" => layer.timing = Some(json_bool(path, key, v)?),
            other => return Err(file_err(path, format!("unknown key '{other}'"))),
        }
    }
    Ok(layer)
}

fn load_json(path: &Path) -> Result<Layer> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e.to_string()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| file_err(path, format!("malformed JSON: {e}")))?;
    match value {
        Value::Object(map) => layer_from_json(path, &map),
        _ => Err(file_err(path, "expected a flat JSON object")),
    }
}

fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| HumError::Usage(format!("--eps: '{t}' is not a number")))
        })
        .collect()
}

fn parse_bcs(s: &str) -> Result<Vec<BcKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(BcKind::ALL.to_vec());
    }
    s.parse::<BcKind>()
        .map(|bc| vec![bc])
        .map_err(|_| HumError::Usage(format!("--bc: expected dirichlet|neumann|dynamic|all, got '{s}'")))
}

fn parse_datum(s: &str) -> Result<InitialDatum> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("sine") {
        return Ok(InitialDatum::Sine);
    }
    if let Some(c) = s.strip_prefix("constant:") {
        let c: f64 = c
            .trim()
            .parse()
            .map_err(|_| HumError::Usage(format!("--datum: bad constant '{c}'")))?;
        if !c.is_finite() {
            return Err(HumError::Usage("--datum: constant must be finite".into()));
        }
        return Ok(InitialDatum::Constant(c));
    }
    if let Some(p) = s.strip_prefix("file:") {
        if p.is_empty() {
            return Err(HumError::Usage("--datum: empty file path".into()));
        }
        return Ok(InitialDatum::Custom(PathBuf::from(p)));
    }
    Err(HumError::Usage(format!(
        "--datum: expected sine|constant:<c>|file:<path>, got '{s}'"
    )))
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> HumError {
    HumError::Usage(format!("{flag}: {msg}"))
}

/// Resolves flags, the optional JSON file and defaults into a validated config.
pub fn parse_config(args: &CliArgs) -> Result<ExperimentConfig> {
    let file_layer = match &args.config {
        Some(path) => load_json(path)?,
        None => Layer::default(),
    };
    let merged = file_layer.overlay(Layer::from(args));
    let d = ExperimentConfig::default();

    let bcs = match merged.bc {
        Some(s) => parse_bcs(&s)?,
        None => d.bcs,
    };
    let final_time = merged.final_time.unwrap_or(d.final_time);
    let tau = merged.tau.unwrap_or(d.tau);
    let omega = (
        merged.omega_start.unwrap_or(d.omega.0),
        merged.omega_end.unwrap_or(d.omega.1),
    );
    let n_x = merged.nx.unwrap_or(d.n_x);
    let eps_list = merged.eps.unwrap_or(d.eps_list);
    let tol = merged.tol.unwrap_or(d.tol);
    let max_iter = merged.max_iter.unwrap_or(d.max_iter);
    let dt = merged.dt.unwrap_or(DEFAULT_CN_DT);
    let scheme = match merged.scheme.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None => match PropagatorScheme::default_for(n_x + 1) {
            PropagatorScheme::CrankNicolson { .. } => PropagatorScheme::CrankNicolson { dt },
            expm => expm,
        },
        Some("expm") => PropagatorScheme::MatrixExponential,
        Some("cn") => PropagatorScheme::CrankNicolson { dt },
        Some(other) => return Err(usage("--scheme", format!("expected cn|expm, got '{other}'"))),
    };
    let initial_datum = match merged.datum {
        Some(s) => parse_datum(&s)?,
        None => d.initial_datum,
    };

    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(usage("--T", format!("must be positive, got {final_time}")));
    }
    if !(tau > 0.0 && tau < final_time) {
        return Err(usage("--tau", format!("must satisfy 0 < tau < T (tau = {tau}, T = {final_time})")));
    }
    let (a, b) = d.domain;
    if !(omega.0 >= a && omega.0 < omega.1 && omega.1 <= b) {
        return Err(usage(
            "--omega-start/--omega-end",
            format!("need {a} <= start < end <= {b}, got ({}, {})", omega.0, omega.1),
        ));
    }
    if n_x < 2 {
        return Err(usage("--nx", format!("must be at least 2, got {n_x}")));
    }
    if eps_list.is_empty() {
        return Err(usage("--eps", "list is empty"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(usage("--eps", "values must be positive"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(usage("--eps", "values must be strictly decreasing"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(usage("--tol", format!("must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(usage("--max-iter", "must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(usage("--dt", format!("must be positive, got {dt}")));
    }
    let snapshots = merged.snapshots.unwrap_or(d.snapshots);

    Ok(ExperimentConfig {
        bcs,
        final_time,
        tau,
        omega,
        domain: d.domain,
        n_x,
        eps_list,
        tol,
        max_iter,
        scheme,
        initial_datum,
        seed: merged.seed.unwrap_or(d.seed),
        output_dir: merged.out,
        fit_cost: merged.fit_cost.unwrap_or(false),
        snapshots,
        record_timing: merged.timing.unwrap_or(false),
    })
}

/// Parses an argv-style iterator (first item is the program name).
pub fn parse_args<I, T>(argv: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = CliArgs::try_parse_from(argv).map_err(|e| HumError::Usage(e.to_string()))?;
    parse_config(&args)
}
