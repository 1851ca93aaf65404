//! Experiment configs: TOML with an `[experiment]` header section and one
//! section named after the experiment kind.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use quasilocal::quatspin::{Direction, Sign};

use crate::error::{CliError, CliResult};

/// Keys that only affect where and how fast a run happens.
const UNHASHED: [&str; 2] = ["out_dir", "workers"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Chsh,
    Epr,
    Quasiprob,
    Twoslit,
    Fourhole,
    Sterngerlach,
    Phasespace,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Chsh => "chsh",
            Kind::Epr => "epr",
            Kind::Quasiprob => "quasiprob",
            Kind::Twoslit => "twoslit",
            Kind::Fourhole => "fourhole",
            Kind::Sterngerlach => "sterngerlach",
            Kind::Phasespace => "phasespace",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command-line values that replace config entries.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// Replaces `experiment.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces `experiment.trials`.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Replaces `experiment.out_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Seeds are 64-bit unsigned; values above `i64::MAX` are written as strings.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum SeedValue {
    Int(u64),
    Text(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    kind: Kind,
    seed: Option<SeedValue>,
    trials: Option<i64>,
    out_dir: Option<PathBuf>,
    workers: Option<usize>,
}

/// A parsed config with overrides applied.
#[derive(Clone, Debug)]
pub struct Config {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub trials: Option<i64>,
    pub out_dir: PathBuf,
    pub workers: usize,
    /// Directory of the config file; relative input paths resolve against it.
    pub base_dir: PathBuf,
    /// Effective config after overrides.
    pub table: Table,
    pub hash: String,
}

impl Config {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, overrides, base_dir)
    }

    pub fn parse(text: &str, overrides: &Overrides, base_dir: PathBuf) -> CliResult<Self> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        let exp = table
            .get_mut("experiment")
            .and_then(Value::as_table_mut)
            .ok_or_else(|| CliError::Validation("missing [experiment] section".into()))?;
        if let Some(seed) = overrides.seed {
            let v = i64::try_from(seed).map(Value::Integer).unwrap_or_else(|_| Value::String(seed.to_string()));
            exp.insert("seed".into(), v);
        }
        if let Some(trials) = overrides.trials {
            let t = i64::try_from(trials).map_err(|_| CliError::Validation("trials out of range".into()))?;
            exp.insert("trials".into(), Value::Integer(t));
        }
        if let Some(dir) = &overrides.out_dir {
            exp.insert("out_dir".into(), Value::String(dir.display().to_string()));
        }
        if let Some(w) = overrides.workers {
            exp.insert("workers".into(), Value::Integer(w as i64));
        }
        let section: ExperimentSection = section(&table, "experiment")?;
        let seed = match section.seed {
            None => None,
            Some(SeedValue::Int(s)) => Some(s),
            Some(SeedValue::Text(t)) => Some(
                t.parse()
                    .map_err(|_| CliError::Validation(format!("[experiment] seed `{t}` is not a 64-bit unsigned integer")))?,
            ),
        };
        for key in table.keys() {
            if key != "experiment" && key != section.kind.name() {
                return Err(CliError::Validation(format!(
                    "unexpected section [{key}] for a {} experiment",
                    section.kind
                )));
            }
        }
        let workers = match section.workers {
            Some(0) => return Err(CliError::Validation("[experiment] workers must be at least 1".into())),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let hash = config_hash(&table);
        Ok(Self {
            kind: section.kind,
            seed,
            trials: section.trials,
            out_dir: section.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            workers,
            base_dir,
            table,
            hash,
        })
    }

    /// The kind-specific section, or an empty table if absent.
    pub fn kind_section<T: DeserializeOwned>(&self) -> CliResult<T> {
        section(&self.table, self.kind.name())
    }

    pub fn kind_table(&self) -> Table {
        self.table.get(self.kind.name()).and_then(Value::as_table).cloned().unwrap_or_default()
    }

    /// Seed and trial count, required for Monte Carlo runs.
    pub fn monte_carlo(&self) -> CliResult<(u64, u64)> {
        let seed = self
            .seed
            .ok_or_else(|| CliError::Validation("[experiment] missing field `seed` required for Monte Carlo runs".into()))?;
        let trials = self
            .trials
            .ok_or_else(|| CliError::Validation("[experiment] missing field `trials` required for Monte Carlo runs".into()))?;
        if trials < 1 {
            return Err(CliError::Validation(format!("[experiment] trials must be at least 1, got {trials}")));
        }
        Ok((seed, trials as u64))
    }

    /// Effective config as JSON, for the report.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(&self.table).unwrap_or_default()
    }
}

fn section<T: DeserializeOwned>(table: &Table, name: &str) -> CliResult<T> {
    let value = table.get(name).cloned().unwrap_or_else(|| Value::Table(Table::new()));
    value
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(format!("[{name}] {}", e.message())))
}

/// SHA-256 over sorted `section.key=value` lines, values rendered as JSON.
/// Execution-only keys are left out.
pub fn config_hash(table: &Table) -> String {
    let mut lines = Vec::new();
    flatten("", &Value::Table(table.clone()), &mut lines);
    lines.retain(|l| !UNHASHED.iter().any(|k| l.starts_with(&format!("experiment.{k}="))));
    lines.sort();
    let digest = Sha256::digest(lines.join("\n").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            let json = serde_json::to_string(other).unwrap_or_default();
            out.push(format!("{prefix}={json}"));
        }
    }
}

/// Fills missing keys of `user` from the serialized `defaults`, rejecting
/// keys the defaults do not have.
pub fn with_defaults<T: Serialize + DeserializeOwned>(name: &str, defaults: &T, user: &Table) -> CliResult<T> {
    let base = Value::try_from(defaults).map_err(|e| CliError::Runtime(e.to_string()))?;
    let Value::Table(mut base) = base else {
        return Err(CliError::Runtime(format!("defaults for [{name}] are not a table")));
    };
    merge(name, &mut base, user)?;
    Value::Table(base)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(format!("[{name}] {}", e.message())))
}

fn merge(path: &str, base: &mut Table, user: &Table) -> CliResult<()> {
    for (k, v) in user {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(u)) => merge(&format!("{path}.{k}"), b, u)?,
            (Some(slot), _) => *slot = v.clone(),
            (None, _) => return Err(CliError::Validation(format!("[{path}] unknown field `{k}`"))),
        }
    }
    Ok(())
}

/// A direction in a config: an in-plane angle in radians, a unit vector
/// `[x, y, z]`, or an axis name such as `"+x"` or `"-y"`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DirectionSpec {
    Angle(f64),
    Vector([f64; 3]),
    Axis(String),
}

impl DirectionSpec {
    pub fn resolve(&self) -> CliResult<Direction> {
        match self {
            DirectionSpec::Angle(t) => Ok(Direction::planar(*t)),
            DirectionSpec::Vector([x, y, z]) => Ok(Direction::new(*x, *y, *z)?),
            DirectionSpec::Axis(s) => parse_axis(s),
        }
    }
}

/// `x`, `+y`, `-z`.
pub fn parse_axis(s: &str) -> CliResult<Direction> {
    let (sign, name) = match s.as_bytes().first() {
        Some(b'+') => (Sign::Plus, &s[1..]),
        Some(b'-') => (Sign::Minus, &s[1..]),
        _ => (Sign::Plus, s),
    };
    let d = match name.to_ascii_lowercase().as_str() {
        "x" => Direction::x_axis(),
        "y" => Direction::y_axis(),
        "z" => Direction::z_axis(),
        _ => return Err(CliError::Validation(format!("unknown axis `{s}`; expected x, y or z with optional sign"))),
    };
    Ok(if sign == Sign::Minus { d.flipped() } else { d })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHSH: &str = r#"
[experiment]
kind = "chsh"
seed = 42
trials = 1000
out_dir = "somewhere"

[chsh]
mode = "born-sampling"
a1 = 0.0
"#;

    #[test]
    fn hash_ignores_order_and_execution_keys() {
        let a = Config::parse(CHSH, &Overrides::default(), PathBuf::new()).unwrap();
        let reordered = "[chsh]\na1 = 0.0\nmode = \"born-sampling\"\n[experiment]\ntrials = 1000\nkind = \"chsh\"\nseed = 42\n";
        let b = Config::parse(reordered, &Overrides::default(), PathBuf::new()).unwrap();
        assert_eq!(a.hash, b.hash);
        let c = Config::parse(CHSH, &Overrides { workers: Some(3), out_dir: Some("x".into()), ..Default::default() }, PathBuf::new())
            .unwrap();
        assert_eq!(a.hash, c.hash);
        let d = Config::parse(CHSH, &Overrides { seed: Some(43), ..Default::default() }, PathBuf::new()).unwrap();
        assert_ne!(a.hash, d.hash);
        assert_eq!(d.seed, Some(43));
        assert_eq!(a.hash.len(), 64);
    }

    #[test]
    fn large_seed_override() {
        let c = Config::parse(CHSH, &Overrides { seed: Some(u64::MAX), ..Default::default() }, PathBuf::new()).unwrap();
        assert_eq!(c.seed, Some(u64::MAX));
    }

    #[test]
    fn errors_are_classified() {
        let parse = Config::parse("[experiment\nkind=", &Overrides::default(), PathBuf::new()).unwrap_err();
        assert_eq!(parse.exit_code(), 2);
        let unknown = Config::parse("[experiment]\nkind = \"chsh\"\n[twoslit]\n", &Overrides::default(), PathBuf::new()).unwrap_err();
        assert_eq!(unknown.exit_code(), 3);
        let bad_kind = Config::parse("[experiment]\nkind = \"laser\"\n", &Overrides::default(), PathBuf::new()).unwrap_err();
        assert_eq!(bad_kind.exit_code(), 3);
        let c = Config::parse("[experiment]\nkind = \"epr\"\ntrials = 5\n", &Overrides::default(), PathBuf::new()).unwrap();
        let missing = c.monte_carlo().unwrap_err();
        assert!(missing.to_string().contains("seed"), "{missing}");
    }

    #[test]
    fn directions() {
        assert_eq!(parse_axis("-y").unwrap(), Direction::y_axis().flipped());
        assert_eq!(parse_axis("x").unwrap(), Direction::x_axis());
        assert!(parse_axis("w").is_err());
        let err = DirectionSpec::Vector([1.0, 1.0, 0.0]).resolve().unwrap_err();
        assert!(err.to_string().contains("1.414"), "{err}");
    }
}
