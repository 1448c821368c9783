//! Run configuration: defaults, flat `key = value` files, embedded report
//! configs and command-line overrides, resolved into one explicit record.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hyperuni_core::structure::{default_phi_grid, default_t_grid};
use hyperuni_core::variance::{CenterSampling, VarianceMethod};
use hyperuni_core::SphereDim;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Generate,
    Analyze,
    Classify,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Generate => "generate",
            Self::Analyze => "analyze",
            Self::Classify => "classify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
}

/// Fully resolved parameters of one run. Reports embed this record, and
/// feeding it back through `--config` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub d: u32,
    pub family: Option<String>,
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub tau: Option<f64>,
    pub restarts: usize,
    pub max_iterations: usize,
    pub replicas: usize,
    pub input: Vec<PathBuf>,
    pub phi_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub s: Vec<f64>,
    /// Truncation tolerance of the identity checks.
    pub tol: Option<f64>,
    /// Absolute truncation tolerance of spectral variance profiles; `None`
    /// uses 1e-2 · max(1, N σ (1 − σ)) per angle.
    pub variance_tol: Option<f64>,
    pub method: VarianceMethod,
    pub centers: usize,
    pub sampling: CenterSampling,
    pub weyl_degree: usize,
    pub window_scale: f64,
    pub check: Vec<String>,
    pub out: PathBuf,
    pub format: Format,
}

/// Keys accepted in config files and as flags.
pub const KEYS: &[&str] = &[
    "d",
    "family",
    "sizes",
    "n",
    "seed",
    "tau",
    "restarts",
    "max-iterations",
    "replicas",
    "input",
    "phi-grid",
    "t-grid",
    "s",
    "tol",
    "variance-tol",
    "method",
    "centers",
    "sampling",
    "weyl-degree",
    "window-scale",
    "check",
    "out",
    "format",
];

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            d: 2,
            family: None,
            sizes: Vec::new(),
            seed: 0,
            tau: None,
            restarts: 8,
            max_iterations: 5000,
            replicas: 100,
            input: Vec::new(),
            phi_grid: Vec::new(),
            t_grid: Vec::new(),
            s: Vec::new(),
            tol: None,
            variance_tol: None,
            method: VarianceMethod::Spectral,
            centers: 0,
            sampling: CenterSampling::Uniform,
            weyl_degree: 10,
            window_scale: 4.0,
            check: Vec::new(),
            out: PathBuf::from("."),
            format: Format::Both,
        }
    }

    /// Sets one key from its textual value. Keys may use `-` or `_`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "d" => self.d = parse(&key, value)?,
            "family" => self.family = Some(value.to_string()),
            "sizes" => self.sizes = parse_list(&key, value)?,
            "n" => self.sizes = vec![parse(&key, value)?],
            "seed" => self.seed = parse(&key, value)?,
            "tau" => self.tau = Some(parse(&key, value)?),
            "restarts" => self.restarts = parse(&key, value)?,
            "max-iterations" => self.max_iterations = parse(&key, value)?,
            "replicas" => self.replicas = parse(&key, value)?,
            "input" => self.input = split(value).map(PathBuf::from).collect(),
            "phi-grid" => self.phi_grid = parse_grid(&key, value)?,
            "t-grid" => self.t_grid = parse_grid(&key, value)?,
            "s" => self.s = parse_grid(&key, value)?,
            "tol" => self.tol = Some(parse(&key, value)?),
            "variance-tol" => self.variance_tol = Some(parse(&key, value)?),
            "method" => {
                self.method = match value {
                    "spectral" => VarianceMethod::Spectral,
                    "monte-carlo" => VarianceMethod::MonteCarlo,
                    "pair-kernel" => VarianceMethod::PairKernel,
                    _ => return Err(bad(&key, value, "spectral, monte-carlo or pair-kernel")),
                }
            }
            "centers" => self.centers = parse(&key, value)?,
            "sampling" => {
                self.sampling = match value {
                    "uniform" => CenterSampling::Uniform,
                    "fibonacci" => CenterSampling::Fibonacci,
                    _ => return Err(bad(&key, value, "uniform or fibonacci")),
                }
            }
            "weyl-degree" => self.weyl_degree = parse(&key, value)?,
            "window-scale" => self.window_scale = parse(&key, value)?,
            "check" => self.check = split(value).map(str::to_string).collect(),
            "out" => self.out = PathBuf::from(value),
            "format" => {
                self.format = match value {
                    "json" => Format::Json,
                    "csv" => Format::Csv,
                    "both" => Format::Both,
                    _ => return Err(bad(&key, value, "json, csv or both")),
                }
            }
            _ => {
                return Err(CliError::Config(format!(
                    "unknown key {key:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Reads `path` as either a flat `key = value` file or a JSON report
    /// with an embedded `config` object.
    pub fn load(command: Command, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            return Self::from_json(command, &text, path);
        }
        let mut cfg = Self::new(command);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    idx + 1
                )));
            };
            cfg.apply(key, value)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        }
        Ok(cfg)
    }

    fn from_json(command: Command, text: &str, path: &Path) -> Result<Self, CliError> {
        let mut value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        let cfg: Self = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("{}: embedded config: {e}", path.display())))?;
        if cfg.command != command {
            return Err(CliError::Config(format!(
                "{} holds a `{}` config, not `{command}`",
                path.display(),
                cfg.command
            )));
        }
        Ok(cfg)
    }

    /// Fills command-specific defaults and checks every parameter against
    /// the preconditions of the operation it feeds.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let dim = SphereDim::new(self.d).map_err(|e| CliError::Config(e.to_string()))?;
        let d = dim.get() as f64;
        for tol in [self.tol, self.variance_tol].into_iter().flatten() {
            require(tol > 0.0 && tol.is_finite(), "tolerances must be positive")?;
        }
        match self.command {
            Command::Generate => {
                let family = self.family.as_deref().unwrap_or("");
                require(
                    matches!(family, "random" | "fibonacci" | "maxdist"),
                    "generate needs --family random, fibonacci or maxdist",
                )?;
                require(!self.sizes.is_empty(), "generate needs --sizes or --n")?;
                require(self.sizes.iter().all(|&n| n > 0), "sizes must be positive")?;
                if family == "fibonacci" {
                    require(self.d == 2, "the fibonacci family exists only for d = 2")?;
                }
                if family == "maxdist" {
                    let tau = *self.tau.get_or_insert(0.5 * d + 0.5);
                    require(
                        tau > 0.5 * d && tau < 0.5 * d + 1.0,
                        "tau must lie in (d/2, d/2 + 1)",
                    )?;
                    require(self.sizes.iter().all(|&n| n >= 2), "maxdist needs at least 2 points")?;
                    require(self.restarts >= 1, "restarts must be at least 1")?;
                    require(self.max_iterations >= 1, "max-iterations must be at least 1")?;
                }
            }
            Command::Analyze => {
                require(!self.input.is_empty(), "analyze needs at least one input path")?;
                if self.phi_grid.is_empty() {
                    self.phi_grid = (1..36).map(|k| k as f64 * PI / 36.0).collect();
                }
                check_grid("phi-grid", &self.phi_grid, 0.0, PI)?;
                require(self.s.iter().all(|&s| s > 0.0), "every s must be positive")?;
                require(self.weyl_degree >= 1, "weyl-degree must be at least 1")?;
                if self.method == VarianceMethod::MonteCarlo && self.centers == 0 {
                    self.centers = 10_000;
                }
                for c in &self.check {
                    require(
                        matches!(c.as_str(), "stolarsky" | "l2"),
                        "check must be stolarsky or l2",
                    )?;
                }
            }
            Command::Classify => {
                match self.family.as_deref() {
                    None => require(
                        !self.input.is_empty(),
                        "classify needs input paths or --family",
                    )?,
                    Some(f) => {
                        require(
                            self.input.is_empty(),
                            "classify takes either input paths or --family, not both",
                        )?;
                        require(
                            matches!(f, "random" | "fibonacci" | "iid-expectation"),
                            "classify --family must be random, fibonacci or iid-expectation",
                        )?;
                        if f == "fibonacci" {
                            require(self.d == 2, "the fibonacci family exists only for d = 2")?;
                        }
                        require(!self.sizes.is_empty(), "classify --family needs --sizes")?;
                    }
                }
                if self.phi_grid.is_empty() {
                    self.phi_grid = default_phi_grid();
                }
                check_grid("phi-grid", &self.phi_grid, 0.0, 0.5 * PI)?;
                if self.t_grid.is_empty() {
                    self.t_grid = default_t_grid();
                }
                check_grid("t-grid", &self.t_grid, 0.0, f64::INFINITY)?;
                require(self.s.iter().all(|&s| s > 0.5 * d), "every s must exceed d/2")?;
                require(
                    self.window_scale > 0.0 && self.window_scale.is_finite(),
                    "window-scale must be positive",
                )?;
            }
        }
        Ok(self)
    }
}

fn require(ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg.to_string()))
    }
}

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::Config(format!("{key}: {value:?} is not {expected}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn split(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    split(value).map(|v| parse(key, v)).collect()
}

/// A number, optionally suffixed with `pi` (`pi`, `0.25pi`, `pi/4`).
fn parse_number(key: &str, token: &str) -> Result<f64, CliError> {
    let t = token.trim();
    if let Some(pos) = t.find("pi") {
        let (coef, rest) = (&t[..pos], &t[pos + 2..]);
        let c = if coef.is_empty() { 1.0 } else { parse::<f64>(key, coef.trim_end_matches('*'))? };
        let divisor = match rest.strip_prefix('/') {
            Some(r) => parse::<f64>(key, r)?,
            None if rest.is_empty() => 1.0,
            None => return Err(bad(key, token, "a number")),
        };
        return Ok(c * PI / divisor);
    }
    parse(key, t)
}

/// `a:b:steps` (inclusive linear grid) or a comma-separated list.
pub fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = value.split(':').collect();
    match parts.as_slice() {
        [a, b, steps] => {
            let (a, b) = (parse_number(key, a)?, parse_number(key, b)?);
            let steps: usize = parse(key, steps.trim())?;
            match steps {
                0 => Err(bad(key, value, "a grid with at least one step")),
                1 => Ok(vec![a]),
                _ => Ok((0..steps)
                    .map(|k| a + (b - a) * k as f64 / (steps - 1) as f64)
                    .collect()),
            }
        }
        [_] => split(value).map(|v| parse_number(key, v)).collect(),
        _ => Err(bad(key, value, "a:b:steps or a comma-separated list")),
    }
}

fn check_grid(name: &str, grid: &[f64], lo: f64, hi: f64) -> Result<(), CliError> {
    require(!grid.is_empty(), &format!("{name} is empty"))?;
    require(
        grid.iter().all(|&v| v > lo && v < hi),
        &format!("{name} values must lie in ({lo}, {hi})"),
    )?;
    require(
        grid.windows(2).all(|w| w[0] < w[1]),
        &format!("{name} must increase strictly"),
    )
}
