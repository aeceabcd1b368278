//! Experiment runner for prompt variants on prototypical commonsense QA.
//!
//! `run` executes one variant over a dataset for several repetitions and
//! persists every prediction, trace and completion; `score` rescores a
//! predictions file; `report` rebuilds comparison tables from run
//! directories alone.

pub mod config;
pub mod fetch;
pub mod report;
pub mod run;
pub mod score;

use thiserror::Error;

pub use config::RunConfig;
pub use report::{build_report, cmd_report, Report};
pub use run::{cmd_run, RunSummary};
pub use score::{cmd_score, ScoreOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run error: {0}")]
    Run(String),
    #[error("scoring error: {0}")]
    Scoring(String),
}

impl CliError {
    /// 1 config, 2 run failure, 3 scoring failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(_) => 2,
            CliError::Scoring(_) => 3,
        }
    }
}

pub(crate) fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Run(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("value serializes"));
        out.push('\n');
    }
    out
}
