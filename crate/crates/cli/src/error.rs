use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
    /// A run produced divergent or non-conserving state.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("scenario {0} failed")]
    ScenarioFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Output(_) => 1,
            CliError::Invariant(_) | CliError::ScenarioFailed(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Output(_) => "output",
            CliError::Invariant(_) => "invariant-violation",
            CliError::ScenarioFailed(_) => "scenario-failed",
        }
    }

    /// Best-effort `error.json` in the output directory.
    pub fn write_report(&self, out: &Path) {
        #[derive(Serialize)]
        struct Report<'a> {
            kind: &'a str,
            exit_code: u8,
            message: String,
        }
        let report = Report { kind: self.kind(), exit_code: self.exit_code(), message: self.to_string() };
        if std::fs::create_dir_all(out).is_ok() {
            if let Ok(text) = serde_json::to_string_pretty(&report) {
                let _ = std::fs::write(out.join("error.json"), text + "\n");
            }
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
