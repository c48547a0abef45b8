//! Run configuration: command-line flags layered over an optional key=value
//! file layered over built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "stoloc", version, about = "Stochastic localization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate localization paths and aggregate covariance decay.
    Localize(Flags),
    /// Stop paths at an operator-norm threshold and test the Gaussian extension.
    Stopped(Flags),
    /// Estimate the third-moment constant over a sweep of dimensions.
    Tau(Flags),
    /// Estimate the thin-shell variance over a sweep of dimensions.
    Sigma(Flags),
    /// Mean widths of a norm and the isotropic constant of a body.
    Widths(Flags),
    /// Compare E‖X‖ with E‖Γ‖.
    Compare(Flags),
    /// Run the invariant suite.
    Verify(Flags),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Localize(_) => CommandKind::Localize,
            Command::Stopped(_) => CommandKind::Stopped,
            Command::Tau(_) => CommandKind::Tau,
            Command::Sigma(_) => CommandKind::Sigma,
            Command::Widths(_) => CommandKind::Widths,
            Command::Compare(_) => CommandKind::Compare,
            Command::Verify(_) => CommandKind::Verify,
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Localize(f)
            | Command::Stopped(f)
            | Command::Tau(f)
            | Command::Sigma(f)
            | Command::Widths(f)
            | Command::Compare(f)
            | Command::Verify(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Localize,
    Stopped,
    Tau,
    Sigma,
    Widths,
    Compare,
    Verify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Localize => "localize",
            CommandKind::Stopped => "stopped",
            CommandKind::Tau => "tau",
            CommandKind::Sigma => "sigma",
            CommandKind::Widths => "widths",
            CommandKind::Compare => "compare",
            CommandKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand. Unset flags fall back to the config file,
/// then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub seed: Option<String>,
    /// key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<String>,
    /// json or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads; never changes results.
    #[arg(long)]
    pub threads: Option<String>,
    /// Dimension, or a comma-separated list for sweeps.
    #[arg(long)]
    pub n: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long = "N")]
    pub samples: Option<String>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub body: Option<String>,
    #[arg(long)]
    pub norm: Option<String>,
    /// twopoint[:p], three-atom, four-atom, gaussian-grid, interval-grid, slab-grid, or a JSON file.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub paths: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    /// Horizon of fixed-time runs.
    #[arg(long)]
    pub t: Option<String>,
    /// fixed, threshold or collapse.
    #[arg(long)]
    pub rule: Option<String>,
    /// Constant in the upper bound C·sqrt(log n)·τ.
    #[arg(long = "C")]
    pub upper_constant: Option<String>,
    /// Constant in the mean-width lower bounds.
    #[arg(long = "c")]
    pub lower_constant: Option<String>,
}

/// Every key understood by config files, in the spelling of the long flags.
pub const KEYS: &[&str] = &[
    "seed", "output", "format", "threads", "n", "N", "family", "body", "norm", "measure", "paths", "dt", "theta",
    "t", "rule", "C", "c",
];

impl Flags {
    fn slot(&mut self, key: &str) -> Option<&mut Option<String>> {
        Some(match key {
            "seed" => &mut self.seed,
            "output" => &mut self.output,
            "format" => &mut self.format,
            "threads" => &mut self.threads,
            "n" => &mut self.n,
            "N" => &mut self.samples,
            "family" => &mut self.family,
            "body" => &mut self.body,
            "norm" => &mut self.norm,
            "measure" => &mut self.measure,
            "paths" => &mut self.paths,
            "dt" => &mut self.dt,
            "theta" => &mut self.theta,
            "t" => &mut self.t,
            "rule" => &mut self.rule,
            "C" => &mut self.upper_constant,
            "c" => &mut self.lower_constant,
            _ => return None,
        })
    }
}

/// One problem with one configuration field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn field_error(field: &str, message: impl Into<String>) -> FieldError {
    FieldError { field: field.into(), message: message.into() }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str, origin: &Path) -> Result<Flags, Vec<FieldError>> {
    let mut flags = Flags::default();
    let mut errors = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("{}:{}", origin.display(), no + 1);
        let Some((key, value)) = line.split_once('=') else {
            errors.push(field_error(&at, format!("expected key=value, got '{line}'")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match flags.slot(key) {
            Some(slot) => *slot = Some(value.to_string()),
            None => errors.push(field_error(&at, format!("unknown key '{key}'; known keys: {}", KEYS.join(", ")))),
        }
    }
    if errors.is_empty() {
        Ok(flags)
    } else {
        Err(errors)
    }
}

/// Fully resolved configuration. Serialized into every report, except for the
/// output location and thread count, which never affect results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub family: String,
    pub body: String,
    pub norm: String,
    pub measure: String,
    pub n: Vec<usize>,
    #[serde(rename = "N")]
    pub samples: usize,
    pub paths: usize,
    pub dt: f64,
    pub theta: f64,
    pub t_max: f64,
    pub rule: Rule,
    #[serde(rename = "C")]
    pub upper_constant: f64,
    #[serde(rename = "c")]
    pub lower_constant: f64,
    pub format: Format,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Fixed,
    Threshold,
    Collapse,
}

pub const DEFAULT_SEED: u64 = 7;
pub const MAX_DIMENSION: usize = 1000;
pub const MAX_THREADS: usize = 1024;

impl RunConfig {
    pub fn defaults(command: CommandKind) -> Self {
        Self {
            command,
            seed: DEFAULT_SEED,
            family: "gaussian".into(),
            body: "cube".into(),
            norm: "l2".into(),
            measure: "twopoint".into(),
            n: vec![3],
            samples: 100_000,
            paths: if command == CommandKind::Stopped { 1000 } else { 2000 },
            dt: 1e-3,
            theta: 1.0,
            t_max: 1.0,
            rule: Rule::Fixed,
            upper_constant: 10.0,
            lower_constant: 0.01,
            format: Format::Json,
            output: None,
            threads: None,
        }
    }

    /// Resolve flags over the config file (if any) over the defaults.
    pub fn resolve(command: &Command) -> Result<Self, Vec<FieldError>> {
        let flags = command.flags();
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| vec![field_error("config", format!("cannot read {}: {e}", path.display()))])?;
                parse_config_file(&text, path)?
            }
            None => Flags::default(),
        };
        let mut cfg = Self::defaults(command.kind());
        let mut errors = Vec::new();
        for key in KEYS {
            let value = flags.clone().slot(key).and_then(|s| s.take()).or_else(|| file.clone().slot(key).and_then(|s| s.take()));
            if let Some(value) = value {
                if let Err(e) = cfg.set(key, &value) {
                    errors.push(e);
                }
            }
        }
        errors.extend(cfg.validate());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), FieldError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, FieldError>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e| field_error(key, format!("cannot parse '{value}': {e}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => {
                self.format = Format::from_str(value, true).map_err(|_| field_error(key, format!("expected json or csv, got '{value}'")))?
            }
            "threads" => self.threads = Some(num(key, value)?),
            "n" => {
                self.n = value.split(',').map(|v| num(key, v.trim())).collect::<Result<_, _>>()?;
            }
            "N" => self.samples = num(key, value)?,
            "family" => self.family = value.into(),
            "body" => self.body = value.into(),
            "norm" => self.norm = value.into(),
            "measure" => self.measure = value.into(),
            "paths" => self.paths = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "t" => self.t_max = num(key, value)?,
            "rule" => {
                self.rule = match value {
                    "fixed" => Rule::Fixed,
                    "threshold" => Rule::Threshold,
                    "collapse" => Rule::Collapse,
                    _ => return Err(field_error(key, format!("expected fixed, threshold or collapse, got '{value}'"))),
                }
            }
            "C" => self.upper_constant = num(key, value)?,
            "c" => self.lower_constant = num(key, value)?,
            _ => return Err(field_error(key, "unknown key")),
        }
        Ok(())
    }

    /// Range checks; identifiers are checked when they are used.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, field: &str, msg: String| {
            if !ok {
                errors.push(field_error(field, msg));
            }
        };
        check(!self.n.is_empty(), "n", "at least one dimension is required".into());
        for &n in &self.n {
            check((1..=MAX_DIMENSION).contains(&n), "n", format!("dimension {n} outside 1..={MAX_DIMENSION}"));
        }
        check(self.samples >= 1, "N", "sample count must be positive".into());
        check((1..=10_000_000).contains(&self.paths), "paths", format!("path count {} outside 1..=10^7", self.paths));
        check(self.dt > 0.0 && self.dt <= 0.1, "dt", format!("step {} outside (0, 0.1]", self.dt));
        check(self.theta > 0.0 && self.theta.is_finite(), "theta", format!("threshold {} must be positive", self.theta));
        check(self.t_max > 0.0 && self.t_max <= 100.0, "t", format!("horizon {} outside (0, 100]", self.t_max));
        check(
            self.upper_constant > 0.0 && self.upper_constant.is_finite(),
            "C",
            format!("constant {} must be positive", self.upper_constant),
        );
        check(
            self.lower_constant > 0.0 && self.lower_constant.is_finite(),
            "c",
            format!("constant {} must be positive", self.lower_constant),
        );
        if let Some(k) = self.threads {
            check((1..=MAX_THREADS).contains(&k), "threads", format!("thread count {k} outside 1..={MAX_THREADS}"));
        }
        errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_yield_to_flags() {
        let dir = std::env::temp_dir().join(format!("stoloc-config-{}", std::process::id()));
        std::fs::write(&dir, "seed = 3\nN = 5000 # comment\nfamily=exp\n").unwrap();
        let flags = Flags { config: Some(dir.clone()), seed: Some("11".into()), ..Default::default() };
        let cfg = RunConfig::resolve(&Command::Tau(flags)).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.samples, 5000);
        assert_eq!(cfg.family, "exp");
    }

    #[test]
    fn bad_fields_are_all_reported() {
        let flags = Flags { dt: Some("0".into()), n: Some("2,x".into()), ..Default::default() };
        let errs = RunConfig::resolve(&Command::Localize(flags)).unwrap_err();
        let fields: Vec<_> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, ["n", "dt"]);
    }

    #[test]
    fn unknown_file_key_names_the_line() {
        let errs = parse_config_file("seed=1\nsamples=3\n", Path::new("run.cfg")).unwrap_err();
        assert_eq!(errs[0].field, "run.cfg:2");
    }
}
