//! Configuration-driven entry point for the stochastic localization
//! experiments. `run` parses arguments, executes one subcommand and returns
//! the process exit code.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or capability error,
//! 3 invariant-suite failure.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

pub mod commands;
pub mod config;
pub mod presets;
pub mod verify;

pub use commands::Outcome;
pub use config::{Cli, Command, CommandKind, FieldError, Format, Rule, RunConfig};

pub const VERSION: &str = concat!("stoloc ", env!("CARGO_PKG_VERSION"));

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_SUITE: i32 = 3;

#[derive(Serialize)]
struct Report<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    seed: u64,
    result: &'a Value,
}

/// JSON report of a finished subcommand. No timestamps, so identical
/// configurations give identical bytes.
pub fn render_report(cfg: &RunConfig, outcome: &Outcome) -> stoloc_core::Result<String> {
    let report =
        Report { version: VERSION, command: cfg.command.name(), config: cfg, seed: cfg.seed, result: &outcome.result };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| stoloc_core::Error::Numerical(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// CSV rendering, preceded by one `#` line with the version, command and seed.
pub fn render_csv(cfg: &RunConfig, outcome: &Outcome) -> String {
    format!("# {VERSION} command={} seed={}\n{}", cfg.command.name(), cfg.seed, outcome.csv)
}

pub fn execute(cfg: &RunConfig) -> stoloc_core::Result<Outcome> {
    match cfg.command {
        CommandKind::Localize => commands::localize(cfg),
        CommandKind::Stopped => commands::stopped(cfg),
        CommandKind::Tau => commands::tau(cfg),
        CommandKind::Sigma => commands::sigma(cfg),
        CommandKind::Widths => commands::widths(cfg),
        CommandKind::Compare => commands::compare(cfg),
        CommandKind::Verify => {
            let suite = verify::run_suite(cfg.seed);
            let mut csv = String::from("check,pass\n");
            for c in &suite.checks {
                csv.push_str(&format!("{},{}\n", c.name, c.pass));
            }
            let pass = suite.pass;
            let result = serde_json::to_value(suite).map_err(|e| stoloc_core::Error::Numerical(e.to_string()))?;
            Ok(Outcome { result, csv, pass })
        }
    }
}

fn error_kind(e: &stoloc_core::Error) -> &'static str {
    use stoloc_core::Error::*;
    match e {
        Config(_) => "config",
        Input(_) => "input",
        Degenerate(_) => "degenerate",
        Capability(_) => "capability",
        Numerical(_) => "numerical",
        Precondition(_) => "precondition",
        Invariant(_) => "invariant",
        Truncated { .. } => "truncated",
    }
}

fn emit_error(out: &mut dyn Write, err: &mut dyn Write, command: Option<&str>, error: Value, message: &str) {
    let doc = json!({"version": VERSION, "command": command, "error": error});
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
    let _ = writeln!(err, "stoloc: {message}");
}

/// Parse `args` (including the program name), run, and return the exit code.
/// Reports go to `--output` or `out`; diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let name = cli.command.kind().name();
    let cfg = match RunConfig::resolve(&cli.command) {
        Ok(cfg) => cfg,
        Err(fields) => {
            let message = fields.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            emit_error(out, err, Some(name), json!({"kind": "usage", "fields": fields}), &message);
            return EXIT_USAGE;
        }
    };
    let outcome = match cfg.threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| execute(&cfg)),
            Err(e) => Err(stoloc_core::Error::Capability(format!("cannot start {k} threads: {e}"))),
        },
        None => execute(&cfg),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let code = if e.is_usage() { EXIT_USAGE } else { EXIT_NUMERICAL };
            emit_error(out, err, Some(name), json!({"kind": error_kind(&e), "message": e.to_string()}), &e.to_string());
            return code;
        }
    };
    let text = match cfg.format {
        Format::Json => match render_report(&cfg, &outcome) {
            Ok(t) => t,
            Err(e) => {
                emit_error(out, err, Some(name), json!({"kind": "numerical", "message": e.to_string()}), &e.to_string());
                return EXIT_NUMERICAL;
            }
        },
        Format::Csv => render_csv(&cfg, &outcome),
    };
    let written = match &cfg.output {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => out.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let msg = format!("cannot write report: {e}");
        emit_error(out, err, Some(name), json!({"kind": "io", "message": msg}), &msg);
        return EXIT_NUMERICAL;
    }
    if outcome.pass {
        EXIT_OK
    } else {
        let _ = writeln!(err, "stoloc: invariant suite failed");
        EXIT_SUITE
    }
}
