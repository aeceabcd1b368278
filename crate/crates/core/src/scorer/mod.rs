//! Max Answers@k, Max Incorrect@k and yes/no accuracy.
//!
//! Both cluster metrics divide matched cluster weight by the question's
//! total weight. Similarity only decides whether an answer may claim a
//! cluster (score ≥ threshold); the cluster's weight is what gets paid.

mod matching;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BinaryLabel, Cluster, ClusterSet, Gold, QuestionRecord};
use crate::decoding::{BinaryAnswer, Prediction};
use crate::wordnet::Taxonomy;

pub use matching::max_weight_matching;
pub use report::{render_table, TableRow};

pub const DEFAULT_ANSWERS_K: [u32; 4] = [1, 3, 5, 10];
pub const DEFAULT_INCORRECT_K: [u32; 3] = [1, 3, 5];
pub const DEFAULT_WORDNET_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no questions to aggregate")]
    EmptyRun,
    #[error("invalid matcher threshold {0}; must lie in (0, 1]")]
    BadThreshold(f64),
    #[error("k list {0:?} must be non-empty, positive and strictly increasing")]
    BadKList(Vec<u32>),
    #[error("prediction for {id:?} does not fit its question kind")]
    KindMismatch { id: String },
}

#[derive(Clone)]
pub enum MatcherKind {
    Exact,
    WordNet(Arc<Taxonomy>),
}

impl fmt::Debug for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatcherKind::Exact => f.write_str("Exact"),
            MatcherKind::WordNet(_) => f.write_str("WordNet"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Matcher {
    kind: MatcherKind,
    threshold: f64,
}

impl Matcher {
    pub fn exact() -> Self {
        Self {
            kind: MatcherKind::Exact,
            threshold: 1.0,
        }
    }

    pub fn wordnet(taxonomy: Arc<Taxonomy>, threshold: f64) -> Result<Self, ScoreError> {
        Self::exact().with_kind(MatcherKind::WordNet(taxonomy)).with_threshold(threshold)
    }

    fn with_kind(mut self, kind: MatcherKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, ScoreError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(ScoreError::BadThreshold(threshold));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MatcherKind::Exact => "exact",
            MatcherKind::WordNet(_) => "wordnet",
        }
    }

    /// Similarity of two normalized strings. Symmetric.
    pub fn pair_score(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        match &self.kind {
            MatcherKind::Exact => 0.0,
            MatcherKind::WordNet(tax) => {
                let single = |s: &str| !s.is_empty() && !s.contains(char::is_whitespace);
                if single(a) && single(b) {
                    tax.lemma_similarity(a, b)
                } else {
                    0.0
                }
            }
        }
    }

    /// Best pairwise score between `answer` and any string of the cluster.
    pub fn match_score(&self, answer: &str, cluster: &Cluster) -> f64 {
        cluster
            .answer_strings
            .iter()
            .map(|s| self.pair_score(answer, s))
            .fold(0.0, f64::max)
    }

    pub fn matches(&self, answer: &str, cluster: &Cluster) -> bool {
        self.match_score(answer, cluster) >= self.threshold
    }
}

/// Matched weight under optimal assignment of the first `k` answers.
pub fn max_answers_weight(answers: &[String], clusters: &ClusterSet, k: usize, matcher: &Matcher) -> u64 {
    let prefix = &answers[..answers.len().min(k)];
    let adjacency: Vec<Vec<usize>> = clusters
        .clusters()
        .iter()
        .map(|c| {
            prefix
                .iter()
                .enumerate()
                .filter(|(_, a)| matcher.matches(a, c))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let weights: Vec<u64> = clusters.clusters().iter().map(|c| c.weight).collect();
    max_weight_matching(&adjacency, &weights, prefix.len()).0
}

/// Matched weight when answers are consumed in rank order, each claiming
/// the heaviest unclaimed matching cluster (ties: smallest id), stopping
/// at the `k`-th unmatched answer.
pub fn max_incorrect_weight(answers: &[String], clusters: &ClusterSet, k: usize, matcher: &Matcher) -> u64 {
    let mut claimed = vec![false; clusters.len()];
    let mut misses = 0;
    let mut total = 0;
    for answer in answers {
        let best = clusters
            .clusters()
            .iter()
            .enumerate()
            .filter(|(i, c)| !claimed[*i] && matcher.matches(answer, c))
            .min_by(|(_, a), (_, b)| b.weight.cmp(&a.weight).then_with(|| a.id.cmp(&b.id)));
        match best {
            Some((i, c)) => {
                claimed[i] = true;
                total += c.weight;
            }
            None => {
                misses += 1;
                if misses >= k {
                    break;
                }
            }
        }
    }
    total
}

fn ratio(weight: u64, clusters: &ClusterSet) -> f64 {
    weight as f64 / clusters.total_weight() as f64
}

pub fn score_max_answers(answers: &[String], clusters: &ClusterSet, k: usize, matcher: &Matcher) -> f64 {
    ratio(max_answers_weight(answers, clusters, k, matcher), clusters)
}

pub fn score_max_incorrect(answers: &[String], clusters: &ClusterSet, k: usize, matcher: &Matcher) -> f64 {
    ratio(max_incorrect_weight(answers, clusters, k, matcher), clusters)
}

pub fn score_binary(prediction: BinaryAnswer, gold: BinaryLabel) -> u32 {
    u32::from(prediction.matches(gold))
}

pub fn aggregate_accuracy(outcomes: &[u32]) -> Result<f64, ScoreError> {
    if outcomes.is_empty() {
        return Err(ScoreError::EmptyRun);
    }
    Ok(outcomes.iter().map(|&o| o as f64).sum::<f64>() / outcomes.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub answers_k: Vec<u32>,
    pub incorrect_k: Vec<u32>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            answers_k: DEFAULT_ANSWERS_K.to_vec(),
            incorrect_k: DEFAULT_INCORRECT_K.to_vec(),
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        for list in [&self.answers_k, &self.incorrect_k] {
            let ok = !list.is_empty() && list[0] >= 1 && list.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(ScoreError::BadKList(list.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuestionMetrics {
    Clustered {
        max_answers: BTreeMap<u32, f64>,
        max_incorrect: BTreeMap<u32, f64>,
    },
    Binary {
        correct: bool,
    },
}

/// Serialized flat: `{"id", "max_answers", "max_incorrect"}` or
/// `{"id", "correct"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScoreLine", into = "ScoreLine")]
pub struct QuestionScore {
    pub id: String,
    pub metrics: QuestionMetrics,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_answers: Option<BTreeMap<u32, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_incorrect: Option<BTreeMap<u32, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correct: Option<bool>,
}

impl From<QuestionScore> for ScoreLine {
    fn from(s: QuestionScore) -> Self {
        match s.metrics {
            QuestionMetrics::Clustered {
                max_answers,
                max_incorrect,
            } => ScoreLine {
                id: s.id,
                max_answers: Some(max_answers),
                max_incorrect: Some(max_incorrect),
                correct: None,
            },
            QuestionMetrics::Binary { correct } => ScoreLine {
                id: s.id,
                max_answers: None,
                max_incorrect: None,
                correct: Some(correct),
            },
        }
    }
}

impl TryFrom<ScoreLine> for QuestionScore {
    type Error = String;

    fn try_from(line: ScoreLine) -> Result<Self, String> {
        let metrics = match (line.max_answers, line.max_incorrect, line.correct) {
            (Some(max_answers), Some(max_incorrect), None) => QuestionMetrics::Clustered {
                max_answers,
                max_incorrect,
            },
            (None, None, Some(correct)) => QuestionMetrics::Binary { correct },
            _ => {
                return Err(format!(
                    "score for {:?} needs max_answers and max_incorrect, or correct",
                    line.id
                ))
            }
        };
        Ok(QuestionScore { id: line.id, metrics })
    }
}

/// Scores one question. A missing prediction scores as an empty answer
/// list (or an unparseable yes/no).
pub fn score_question(
    question: &QuestionRecord,
    prediction: Option<&Prediction>,
    matcher: &Matcher,
    config: &ScoreConfig,
) -> Result<QuestionScore, ScoreError> {
    let mismatch = || ScoreError::KindMismatch {
        id: question.id.clone(),
    };
    let metrics = match &question.gold {
        Gold::Clusters(clusters) => {
            let answers: &[String] = match prediction {
                None => &[],
                Some(Prediction::Ranked(r)) => &r.answers,
                Some(Prediction::Binary(_)) => return Err(mismatch()),
            };
            QuestionMetrics::Clustered {
                max_answers: config
                    .answers_k
                    .iter()
                    .map(|&k| (k, score_max_answers(answers, clusters, k as usize, matcher)))
                    .collect(),
                max_incorrect: config
                    .incorrect_k
                    .iter()
                    .map(|&k| (k, score_max_incorrect(answers, clusters, k as usize, matcher)))
                    .collect(),
            }
        }
        Gold::Label(gold) => {
            let answer = match prediction {
                None => BinaryAnswer::Unparseable,
                Some(Prediction::Binary(b)) => *b,
                Some(Prediction::Ranked(_)) => return Err(mismatch()),
            };
            QuestionMetrics::Binary {
                correct: score_binary(answer, *gold) == 1,
            }
        }
    };
    Ok(QuestionScore {
        id: question.id.clone(),
        metrics,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub n_questions: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub max_answers: BTreeMap<u32, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub max_incorrect: BTreeMap<u32, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_maps<'a>(maps: impl Iterator<Item = &'a BTreeMap<u32, f64>>) -> BTreeMap<u32, f64> {
    let mut columns: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for map in maps {
        for (&k, &v) in map {
            columns.entry(k).or_default().push(v);
        }
    }
    columns.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

/// Unweighted mean of every metric over the questions of one run.
pub fn aggregate(scores: &[QuestionScore]) -> Result<AggregateScores, ScoreError> {
    if scores.is_empty() {
        return Err(ScoreError::EmptyRun);
    }
    let mut answers = Vec::new();
    let mut incorrect = Vec::new();
    let mut binary = Vec::new();
    for s in scores {
        match &s.metrics {
            QuestionMetrics::Clustered {
                max_answers,
                max_incorrect,
            } => {
                answers.push(max_answers);
                incorrect.push(max_incorrect);
            }
            QuestionMetrics::Binary { correct } => binary.push(u32::from(*correct)),
        }
    }
    Ok(AggregateScores {
        n_questions: scores.len(),
        max_answers: mean_maps(answers.into_iter()),
        max_incorrect: mean_maps(incorrect.into_iter()),
        accuracy: if binary.is_empty() {
            None
        } else {
            Some(aggregate_accuracy(&binary)?)
        },
    })
}

/// Mean over repetitions of already aggregated runs.
pub fn mean_over_repetitions(reps: &[AggregateScores]) -> Result<AggregateScores, ScoreError> {
    if reps.is_empty() {
        return Err(ScoreError::EmptyRun);
    }
    let accuracies: Vec<f64> = reps.iter().filter_map(|r| r.accuracy).collect();
    Ok(AggregateScores {
        n_questions: reps[0].n_questions,
        max_answers: mean_maps(reps.iter().map(|r| &r.max_answers)),
        max_incorrect: mean_maps(reps.iter().map(|r| &r.max_incorrect)),
        accuracy: (!accuracies.is_empty()).then(|| mean(&accuracies)),
    })
}
