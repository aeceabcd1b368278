use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{normalize_answer, DecodeError};

pub const DEFAULT_ANSWER_CAP: usize = 10;

/// Longest line (in words) still read as a bare list item when a completion
/// has no list markers at all.
const BARE_ITEM_MAX_WORDS: usize = 5;

static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:\*\*)?(?:\(?\d{1,3}[.):]\s*|[-*•‣◦▪·–—+]\s+)").unwrap()
});

static EXPLANATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s*(?::|\s[-–—]\s|\().*$").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedAnswers {
    pub question_id: String,
    /// Normalized, deduplicated, in order of first appearance.
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_sources: Vec<String>,
}

impl RankedAnswers {
    pub fn empty(question_id: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            answers: Vec::new(),
            raw_sources: Vec::new(),
        }
    }

    /// Normalizes, drops empties and duplicates, and keeps at most `cap`.
    pub fn from_candidates<'a>(
        question_id: impl Into<String>,
        candidates: impl IntoIterator<Item = &'a str>,
        cap: usize,
    ) -> Self {
        let mut answers: Vec<String> = Vec::new();
        for c in candidates {
            if answers.len() >= cap {
                break;
            }
            let n = normalize_answer(c);
            if !n.is_empty() && !answers.contains(&n) {
                answers.push(n);
            }
        }
        Self {
            question_id: question_id.into(),
            answers,
            raw_sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

fn strip_marker(line: &str) -> Option<&str> {
    LIST_MARKER.find(line).map(|m| &line[m.end()..])
}

/// Drops a trailing gloss such as `: because ...`, ` - reason` or `(note)`,
/// unless that would leave nothing.
fn drop_explanation(item: &str) -> &str {
    match EXPLANATION.find(item) {
        Some(m) if m.start() > 0 => &item[..m.start()],
        _ => item,
    }
}

/// Candidate strings in order, before normalization.
///
/// 1. If any line starts with a list marker (`1.`, `2)`, `-`, `*`, `•`),
///    only marker lines count; trailing explanations are cut.
/// 2. Otherwise, two or more short lines are taken one answer per line.
/// 3. Otherwise the final non-empty line is split on commas/semicolons,
///    after dropping any `Label:` lead-in.
pub fn candidate_strings(raw: &str) -> Vec<&str> {
    let lines: Vec<&str> = raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect();

    let marked: Vec<&str> = lines
        .iter()
        .filter_map(|l| strip_marker(l))
        .map(drop_explanation)
        .collect();
    if !marked.is_empty() {
        return marked;
    }

    let short = |l: &&str| l.split_whitespace().count() <= BARE_ITEM_MAX_WORDS;
    if lines.len() >= 2 && lines.iter().all(short) {
        return lines;
    }

    let Some(last) = lines.last() else {
        return Vec::new();
    };
    let body = match last.rfind(':') {
        Some(i) => &last[i + 1..],
        None => last,
    };
    body.split([',', ';']).collect()
}

pub fn extract_answers(
    question_id: &str,
    raw_completion: &str,
    cap: usize,
) -> Result<RankedAnswers, DecodeError> {
    let mut ranked = RankedAnswers::from_candidates(question_id, candidate_strings(raw_completion), cap);
    if ranked.is_empty() {
        return Err(DecodeError::EmptyExtraction);
    }
    ranked.raw_sources.push(raw_completion.to_string());
    Ok(ranked)
}
