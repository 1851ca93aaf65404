use thiserror::Error;

/// Failures mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("config hash {config} does not match log header hash {log}")]
    HashMismatch { log: String, config: String },
    #[error("replay mismatch in {statistic}: report has {expected}, log gives {actual}")]
    Mismatch { statistic: String, expected: String, actual: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) => 4,
            CliError::HashMismatch { .. } => 5,
            CliError::Mismatch { .. } => 6,
        }
    }

    /// Final stdout line for a failed command.
    pub fn summary(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "status": "error",
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Mismatch { statistic, .. } = self {
            v["verdict"] = "MISMATCH".into();
            v["statistic"] = statistic.clone().into();
        }
        v
    }
}

impl From<quasilocal::Error> for CliError {
    fn from(e: quasilocal::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
