//! Line-delimited QA datasets: weighted-cluster questions, binary yes/no
//! questions and few-shot exemplar files.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::decoding::normalize_answer;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file not found: {0}")]
    MissingFile(PathBuf),
    #[error("line {line}: {reason}")]
    SchemaViolation { line: usize, reason: String },
    #[error("duplicate question id {0:?}")]
    DuplicateId(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Yes,
    No,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Yes => "yes",
            BinaryLabel::No => "no",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: String,
    /// Number of annotators who gave an answer in this family.
    pub weight: u64,
    pub answer_strings: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    clusters: Vec<Cluster>,
    total_weight: u64,
}

impl ClusterSet {
    /// Builds a set, checking that it is non-empty, ids are unique and every
    /// weight and answer string is usable.
    pub fn new(clusters: Vec<Cluster>) -> std::result::Result<Self, String> {
        if clusters.is_empty() {
            return Err("question has no answer clusters".into());
        }
        let mut seen = HashSet::new();
        for c in &clusters {
            if !seen.insert(c.id.as_str()) {
                return Err(format!("duplicate cluster id {:?}", c.id));
            }
            if c.weight == 0 {
                return Err(format!("cluster {:?} has zero weight", c.id));
            }
            if c.answer_strings.is_empty() {
                return Err(format!("cluster {:?} has no answers", c.id));
            }
            if c.answer_strings.iter().any(|a| a.is_empty()) {
                return Err(format!("cluster {:?} has an empty answer", c.id));
            }
        }
        let total_weight = clusters.iter().map(|c| c.weight).sum();
        Ok(Self {
            clusters,
            total_weight,
        })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gold {
    Clusters(ClusterSet),
    Label(BinaryLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionKind {
    Clustered,
    Binary,
}

/// One question plus its gold data. The kind is carried by [`Gold`], so a
/// record can never hold both clusters and a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionRecord {
    pub id: String,
    pub text: String,
    pub gold: Gold,
}

impl QuestionRecord {
    pub fn kind(&self) -> QuestionKind {
        match self.gold {
            Gold::Clusters(_) => QuestionKind::Clustered,
            Gold::Label(_) => QuestionKind::Binary,
        }
    }

    pub fn clusters(&self) -> Option<&ClusterSet> {
        match &self.gold {
            Gold::Clusters(c) => Some(c),
            Gold::Label(_) => None,
        }
    }

    pub fn gold_label(&self) -> Option<BinaryLabel> {
        match self.gold {
            Gold::Label(l) => Some(l),
            Gold::Clusters(_) => None,
        }
    }

    /// Serializes the record back to its external line format.
    pub fn to_json_line(&self) -> String {
        let value = match &self.gold {
            Gold::Clusters(set) => {
                let clusters: BTreeMap<&str, RawCluster> = set
                    .clusters()
                    .iter()
                    .map(|c| {
                        (
                            c.id.as_str(),
                            RawCluster {
                                count: c.weight,
                                answers: c.answer_strings.iter().cloned().collect(),
                            },
                        )
                    })
                    .collect();
                serde_json::json!({ "id": self.id, "question": self.text, "clusters": clusters })
            }
            Gold::Label(l) => {
                serde_json::json!({ "id": self.id, "question": self.text, "label": l.as_str() })
            }
        };
        value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question: String,
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExemplarSet {
    pub exemplars: Vec<Exemplar>,
}

impl ExemplarSet {
    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCluster {
    count: u64,
    answers: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClustered {
    id: String,
    question: String,
    clusters: BTreeMap<String, RawCluster>,
}

#[derive(Debug, Deserialize)]
struct RawBinary {
    id: String,
    question: String,
    label: Value,
}

/// Reads the non-blank lines of a file, keeping 1-based line numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    if !path.is_file() {
        return Err(DatasetError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn violation(line: usize, reason: impl Into<String>) -> DatasetError {
    DatasetError::SchemaViolation {
        line,
        reason: reason.into(),
    }
}

fn check_header(line: usize, id: &str, question: &str) -> Result<()> {
    if id.trim().is_empty() {
        return Err(violation(line, "empty id"));
    }
    if question.trim().is_empty() {
        return Err(violation(line, "empty question text"));
    }
    Ok(())
}

fn check_unique(seen: &mut HashSet<String>, id: &str) -> Result<()> {
    if !seen.insert(id.to_string()) {
        return Err(DatasetError::DuplicateId(id.to_string()));
    }
    Ok(())
}

pub fn parse_clustered_line(line: usize, text: &str) -> Result<QuestionRecord> {
    let raw: RawClustered =
        serde_json::from_str(text).map_err(|e| violation(line, e.to_string()))?;
    check_header(line, &raw.id, &raw.question)?;
    let clusters = raw
        .clusters
        .into_iter()
        .map(|(id, c)| Cluster {
            id,
            weight: c.count,
            answer_strings: c.answers.iter().map(|a| normalize_answer(a)).collect(),
        })
        .collect();
    let set = ClusterSet::new(clusters).map_err(|r| violation(line, r))?;
    Ok(QuestionRecord {
        id: raw.id,
        text: raw.question,
        gold: Gold::Clusters(set),
    })
}

/// Maps the accepted label spellings: yes/true/1 and no/false/0, any case.
pub fn parse_label(value: &Value) -> Option<BinaryLabel> {
    match value {
        Value::Bool(true) => Some(BinaryLabel::Yes),
        Value::Bool(false) => Some(BinaryLabel::No),
        Value::Number(n) => match n.as_i64() {
            Some(1) => Some(BinaryLabel::Yes),
            Some(0) => Some(BinaryLabel::No),
            _ => None,
        },
        Value::String(s) => match s.trim().to_lowercase().as_str() {
            "yes" | "true" | "1" => Some(BinaryLabel::Yes),
            "no" | "false" | "0" => Some(BinaryLabel::No),
            _ => None,
        },
        _ => None,
    }
}

pub fn parse_binary_line(line: usize, text: &str) -> Result<QuestionRecord> {
    let raw: RawBinary = serde_json::from_str(text).map_err(|e| violation(line, e.to_string()))?;
    check_header(line, &raw.id, &raw.question)?;
    let label = parse_label(&raw.label)
        .ok_or_else(|| violation(line, format!("unrecognized label {}", raw.label)))?;
    Ok(QuestionRecord {
        id: raw.id,
        text: raw.question,
        gold: Gold::Label(label),
    })
}

pub fn load_clustered_dataset(path: impl AsRef<Path>) -> Result<Vec<QuestionRecord>> {
    load_with(path.as_ref(), parse_clustered_line)
}

pub fn load_binary_dataset(path: impl AsRef<Path>) -> Result<Vec<QuestionRecord>> {
    load_with(path.as_ref(), parse_binary_line)
}

fn load_with(
    path: &Path,
    parse: impl Fn(usize, &str) -> Result<QuestionRecord>,
) -> Result<Vec<QuestionRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, text) in read_lines(path)? {
        let record = parse(line, &text)?;
        check_unique(&mut seen, &record.id)?;
        records.push(record);
    }
    Ok(records)
}

/// Loads few-shot exemplars verbatim. An empty file is not an error here;
/// variants that need exemplars reject an empty set when the prompt is built.
pub fn load_exemplars(path: impl AsRef<Path>) -> Result<ExemplarSet> {
    let mut exemplars = Vec::new();
    for (line, text) in read_lines(path.as_ref())? {
        let ex: Exemplar =
            serde_json::from_str(&text).map_err(|e| violation(line, e.to_string()))?;
        if ex.question.trim().is_empty() {
            return Err(violation(line, "empty exemplar question"));
        }
        exemplars.push(ex);
    }
    Ok(ExemplarSet { exemplars })
}
