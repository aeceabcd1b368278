use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryAnswer {
    Yes,
    No,
    Unparseable,
}

impl BinaryAnswer {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryAnswer::Yes => "yes",
            BinaryAnswer::No => "no",
            BinaryAnswer::Unparseable => "unparseable",
        }
    }

    pub fn matches(self, gold: BinaryLabel) -> bool {
        matches!(
            (self, gold),
            (BinaryAnswer::Yes, BinaryLabel::Yes) | (BinaryAnswer::No, BinaryLabel::No)
        )
    }
}

impl fmt::Display for BinaryAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<BinaryLabel> for BinaryAnswer {
    fn from(l: BinaryLabel) -> Self {
        match l {
            BinaryLabel::Yes => BinaryAnswer::Yes,
            BinaryLabel::No => BinaryAnswer::No,
        }
    }
}

static LEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[^\p{L}\p{N}]*(yes|no|true|false)\b").unwrap());

static ANSWER_IS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\banswer\s*(?:is|:)\s*[^\p{L}\p{N}]*(yes|no|true|false)\b").unwrap()
});

fn token(word: &str) -> BinaryAnswer {
    match word.to_ascii_lowercase().as_str() {
        "yes" | "true" => BinaryAnswer::Yes,
        _ => BinaryAnswer::No,
    }
}

/// Reads a yes/no verdict from a completion.
///
/// Patterns, earliest position wins: a leading `yes`/`no`/`true`/`false`
/// (ignoring punctuation and markup), then `answer is <token>` or
/// `answer: <token>` anywhere. Anything else is `Unparseable`.
pub fn parse_binary_answer(raw: &str) -> BinaryAnswer {
    let text = raw.trim();
    if let Some(c) = LEADING.captures(text) {
        return token(&c[1]);
    }
    ANSWER_IS
        .captures(text)
        .map(|c| token(&c[1]))
        .unwrap_or(BinaryAnswer::Unparseable)
}
