use std::fmt::Write;

use super::{AggregateScores, ScoreConfig};

const CELL: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub scores: AggregateScores,
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:>CELL$.3}"),
        None => format!("{:>CELL$}", "-"),
    }
}

/// Plain-text table: one row per entry, Max Answers columns then Max
/// Incorrect columns (or a single Accuracy column when no row carries
/// cluster metrics).
pub fn render_table(header: &str, rows: &[TableRow], config: &ScoreConfig) -> String {
    let width = rows
        .iter()
        .map(|r| r.label.len())
        .chain([header.len()])
        .max()
        .unwrap_or(0);
    let clustered = rows
        .iter()
        .any(|r| !r.scores.max_answers.is_empty() || !r.scores.max_incorrect.is_empty());
    let with_accuracy = rows.iter().any(|r| r.scores.accuracy.is_some());

    let mut out = String::new();
    if clustered {
        let answers_w = CELL * config.answers_k.len();
        let incorrect_w = CELL * config.incorrect_k.len();
        let _ = write!(out, "{:width$} |{:^answers_w$}|{:^incorrect_w$}", "", "Max Answers", "Max Incorrect");
        if with_accuracy {
            let _ = write!(out, "|{:>CELL$}", "");
        }
        out.push('\n');
        let _ = write!(out, "{header:width$} |");
        for k in &config.answers_k {
            let _ = write!(out, "{:>CELL$}", format!("@{k}"));
        }
        out.push('|');
        for k in &config.incorrect_k {
            let _ = write!(out, "{:>CELL$}", format!("@{k}"));
        }
        if with_accuracy {
            let _ = write!(out, "|{:>CELL$}", "Acc");
        }
        out.push('\n');
        for row in rows {
            let s = &row.scores;
            let _ = write!(out, "{:width$} |", row.label);
            for k in &config.answers_k {
                out.push_str(&cell(s.max_answers.get(k).copied()));
            }
            out.push('|');
            for k in &config.incorrect_k {
                out.push_str(&cell(s.max_incorrect.get(k).copied()));
            }
            if with_accuracy {
                out.push('|');
                out.push_str(&cell(s.accuracy));
            }
            out.push('\n');
        }
    } else {
        let _ = writeln!(out, "{header:width$} |{:>10}", "Accuracy");
        for row in rows {
            let _ = writeln!(out, "{:width$} |{:>10}", row.label, cell(row.scores.accuracy).trim_start());
        }
    }
    out
}
