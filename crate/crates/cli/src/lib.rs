//! Config-driven runner for the `quasilocal` experiments.
//!
//! Exit codes: 0 success, 2 parse error, 3 invalid config, 4 runtime
//! failure, 5 config hash differs from the trial log header, 6 replay found
//! statistics that differ from the stored report.

pub mod config;
pub mod error;
pub mod experiments;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{config_hash, Config, Kind, Overrides};
pub use error::{CliError, CliResult};
pub use experiments::{LogHeader, Plan, LOG_FILE, REPORT_FILE};

#[derive(Parser, Debug)]
#[command(name = "quasilocal", version, about = "Run, replay and validate quasilocal experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute statistics from a trial log and compare them with the
    /// report stored next to it.
    Replay {
        log: PathBuf,
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    kind: Kind,
    config_hash: &'a str,
    config: Value,
    results: &'a Value,
    files: &'a [String],
    duration_seconds: f64,
}

/// Runs a command, writing human-readable lines to `out`. Returns the JSON
/// summary that ends the output.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<Value> {
    match &cli.command {
        Command::Run { config, overrides } => run(config, overrides, out),
        Command::Replay { log, config, overrides } => replay(log, config, overrides, out),
        Command::Validate { config, overrides } => validate(config, overrides, out),
    }
}

pub fn run(config: &Path, overrides: &Overrides, out: &mut dyn Write) -> CliResult<Value> {
    let start = Instant::now();
    let cfg = Config::load(config, overrides)?;
    let plan = Plan::prepare(&cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let (results, mut files) = plan.execute(&cfg, &cfg.out_dir)?;
    files.push(REPORT_FILE.to_string());
    let report = Report {
        tool: "quasilocal",
        version: env!("CARGO_PKG_VERSION"),
        kind: cfg.kind,
        config_hash: &cfg.hash,
        config: cfg.echo(),
        results: &results,
        files: &files,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    let mut f = File::create(cfg.out_dir.join(REPORT_FILE))?;
    serde_json::to_writer_pretty(&mut f, &report)?;
    f.write_all(b"\n")?;
    writeln!(out, "{} experiment finished in {:.3} s", cfg.kind, report.duration_seconds)?;
    writeln!(out, "config hash {}", cfg.hash)?;
    for name in &files {
        writeln!(out, "wrote {}", cfg.out_dir.join(name).display())?;
    }
    Ok(json!({
        "status": "ok",
        "kind": cfg.kind,
        "config_hash": cfg.hash,
        "out_dir": cfg.out_dir,
        "results": summarize(&results),
    }))
}

/// Drops bulky arrays from the stdout summary.
fn summarize(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.iter()
                .filter(|(_, v)| !matches!(v, Value::Array(a) if a.len() > 16))
                .map(|(k, v)| (k.clone(), summarize(v)))
                .collect(),
        ),
        other => other.clone(),
    }
}

pub fn validate(config: &Path, overrides: &Overrides, out: &mut dyn Write) -> CliResult<Value> {
    let cfg = Config::load(config, overrides)?;
    let plan = Plan::prepare(&cfg)?;
    let derived = plan.derived()?;
    writeln!(out, "OK")?;
    if let Value::Object(m) = &derived {
        for (k, v) in m {
            writeln!(out, "  {k} = {v}")?;
        }
    }
    Ok(json!({
        "status": "OK",
        "kind": cfg.kind,
        "config_hash": cfg.hash,
        "monte_carlo": plan.is_monte_carlo(),
        "derived": derived,
    }))
}

pub fn replay(log: &Path, config: &Path, overrides: &Overrides, out: &mut dyn Write) -> CliResult<Value> {
    let cfg = Config::load(config, overrides)?;
    let file = File::open(log).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", log.display())))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header: LogHeader = serde_json::from_str(first.trim_end())
        .map_err(|e| CliError::Parse(format!("trial log header: {e}")))?;
    if header.config_hash != cfg.hash {
        return Err(CliError::HashMismatch { log: header.config_hash, config: cfg.hash });
    }
    let report_path = log.parent().unwrap_or(Path::new(".")).join(REPORT_FILE);
    let report: Value = serde_json::from_str(
        &fs::read_to_string(&report_path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", report_path.display())))?,
    )
    .map_err(|e| CliError::Parse(format!("{}: {e}", report_path.display())))?;
    let plan = Plan::prepare(&cfg)?;
    let (tallies, estimates) = plan.statistics_from_log(&header, reader)?;
    for (name, recomputed) in [("tallies", &tallies), ("estimates", &estimates)] {
        let stored = &report["results"][name];
        if let Some((path, expected, actual)) = first_difference(name, stored, recomputed) {
            return Err(CliError::Mismatch { statistic: path, expected, actual });
        }
    }
    writeln!(out, "replayed {} against {}", log.display(), report_path.display())?;
    writeln!(out, "verdict OK")?;
    Ok(json!({ "verdict": "OK", "kind": cfg.kind, "config_hash": cfg.hash, "tallies": tallies }))
}

/// Path and values of the first leaf where `a` and `b` differ. Floats are
/// compared to a relative 1e-12, since they pass through a text round trip.
pub fn first_difference(path: &str, a: &Value, b: &Value) -> Option<(String, String, String)> {
    let differ = || Some((path.to_string(), a.to_string(), b.to_string()));
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            keys.into_iter().find_map(|k| {
                first_difference(&format!("{path}.{k}"), x.get(k).unwrap_or(&Value::Null), y.get(k).unwrap_or(&Value::Null))
            })
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return differ();
            }
            x.iter().zip(y).enumerate().find_map(|(i, (p, q))| first_difference(&format!("{path}[{i}]"), p, q))
        }
        (Value::Number(x), Value::Number(y)) => {
            let same = if x.is_f64() || y.is_f64() {
                let (p, q) = (x.as_f64()?, y.as_f64()?);
                (p - q).abs() <= 1e-12 * p.abs().max(q.abs())
            } else {
                x == y
            };
            if same { None } else { differ() }
        }
        _ if a == b => None,
        _ => differ(),
    }
}
