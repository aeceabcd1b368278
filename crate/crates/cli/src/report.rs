//! Comparison tables rebuilt from persisted run directories.

use std::fs;
use std::path::{Path, PathBuf};

use proto_harness_core::prompt::VariantTag;
use proto_harness_core::scorer::{
    aggregate, mean_over_repetitions, render_table, AggregateScores, QuestionScore, ScoreConfig, TableRow,
};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SNAPSHOT_FILE};
use crate::{write_file, CliError};

pub const SCORES_FILE: &str = "scores.jsonl";

pub fn repetition_dir(run_dir: &Path, rep: u32) -> PathBuf {
    run_dir.join(format!("rep-{rep}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: VariantTag,
    pub label: String,
    pub mean: AggregateScores,
    pub repetitions: Vec<AggregateScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub score_config: ScoreConfig,
    pub rows: Vec<VariantRow>,
}

fn scoring_error(msg: String) -> CliError {
    CliError::Scoring(msg)
}

fn read_scores(path: &Path) -> Result<Vec<QuestionScore>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| scoring_error(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| scoring_error(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn load_run(dir: &Path) -> Result<(ScoreConfig, VariantRow), CliError> {
    let config = RunConfig::load(Some(&dir.join(SNAPSHOT_FILE)), &[])
        .map_err(|e| scoring_error(format!("{}: {e}", dir.display())))?;
    let mut repetitions = Vec::new();
    for rep in 1..=config.run.repetitions {
        let scores = read_scores(&repetition_dir(dir, rep).join(SCORES_FILE))?;
        repetitions.push(aggregate(&scores).map_err(|e| scoring_error(format!("{}: {e}", dir.display())))?);
    }
    let mean = mean_over_repetitions(&repetitions).map_err(|e| scoring_error(e.to_string()))?;
    Ok((
        config.scoring.score_config(),
        VariantRow {
            variant: config.variant,
            label: config.variant.label().to_string(),
            mean,
            repetitions,
        },
    ))
}

/// One row per run, ordered by variant tag (input order among equal tags).
/// All runs must share their k lists.
pub fn build_report(run_dirs: &[PathBuf]) -> Result<Report, CliError> {
    if run_dirs.is_empty() {
        return Err(scoring_error("no run directories given".into()));
    }
    let mut score_config: Option<ScoreConfig> = None;
    let mut rows = Vec::new();
    for dir in run_dirs {
        let (cfg, row) = load_run(dir)?;
        match &score_config {
            None => score_config = Some(cfg),
            Some(first) if *first != cfg => {
                return Err(scoring_error(format!(
                    "incompatible runs: {} uses k lists {:?}/{:?}, expected {:?}/{:?}",
                    dir.display(),
                    cfg.answers_k,
                    cfg.incorrect_k,
                    first.answers_k,
                    first.incorrect_k
                )))
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| r.variant);
    Ok(Report {
        score_config: score_config.expect("at least one run"),
        rows,
    })
}

/// Mean table followed by a per-repetition appendix when any run has more
/// than one repetition.
pub fn render_report(report: &Report) -> String {
    let means: Vec<TableRow> = report
        .rows
        .iter()
        .map(|r| TableRow {
            label: r.label.clone(),
            scores: r.mean.clone(),
        })
        .collect();
    let mut out = render_table("Prompt", &means, &report.score_config);
    if report.rows.iter().any(|r| r.repetitions.len() > 1) {
        let appendix: Vec<TableRow> = report
            .rows
            .iter()
            .flat_map(|r| {
                r.repetitions.iter().enumerate().map(|(i, s)| TableRow {
                    label: format!("{} rep-{}", r.label, i + 1),
                    scores: s.clone(),
                })
            })
            .collect();
        out.push_str("\nPer repetition\n");
        out.push_str(&render_table("Prompt", &appendix, &report.score_config));
    }
    out
}

pub fn write_report(report: &Report, out_dir: &Path) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    write_file(&out_dir.join("report.json"), json)?;
    write_file(&out_dir.join("report.txt"), render_report(report))
}

/// Builds the comparison and writes it to `out_dir` when given. Returns the
/// plain-text rendering.
pub fn cmd_report(run_dirs: &[PathBuf], out_dir: Option<&Path>) -> Result<String, CliError> {
    let report = build_report(run_dirs)?;
    if let Some(dir) = out_dir {
        write_report(&report, dir).map_err(|e| scoring_error(e.to_string()))?;
    }
    Ok(render_report(&report))
}
