//! Rescoring a predictions file against a dataset.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use proto_harness_core::dataset::{load_binary_dataset, load_clustered_dataset, QuestionRecord};
use proto_harness_core::decoding::{parse_binary_answer, Prediction, RankedAnswers};
use proto_harness_core::scorer::{aggregate, render_table, score_question, AggregateScores, Matcher, QuestionScore, ScoreConfig, TableRow};
use proto_harness_core::wordnet::parse_wordnet;
use serde::Serialize;
use serde_json::Value;

use crate::config::{DatasetConfig, DatasetKind, MatcherChoice, ScoringSection};
use crate::{jsonl, write_file, CliError};

pub fn load_questions(dataset: &DatasetConfig) -> Result<Vec<QuestionRecord>, CliError> {
    let loaded = match dataset.kind {
        DatasetKind::Clustered => load_clustered_dataset(&dataset.path),
        DatasetKind::Binary => load_binary_dataset(&dataset.path),
    };
    let questions = loaded.map_err(|e| CliError::Config(format!("{}: {e}", dataset.path.display())))?;
    if questions.is_empty() {
        return Err(CliError::Config(format!("{} holds no questions", dataset.path.display())));
    }
    Ok(questions)
}

pub fn build_matcher(scoring: &ScoringSection) -> Result<Matcher, CliError> {
    match scoring.matcher {
        MatcherChoice::Exact => Matcher::exact()
            .with_threshold(scoring.threshold)
            .map_err(|e| CliError::Config(e.to_string())),
        MatcherChoice::Wordnet => {
            let dir = scoring
                .wordnet_dir
                .as_ref()
                .ok_or_else(|| CliError::Config("scoring.wordnet_dir is required".into()))?;
            let taxonomy = parse_wordnet(dir).map_err(|e| CliError::Config(format!("wordnet: {e}")))?;
            Matcher::wordnet(Arc::new(taxonomy), scoring.threshold).map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

/// One `{"<id>": [answers...]}` or `{"<id>": "yes"}` line.
pub fn prediction_line(id: &str, prediction: &Prediction) -> Value {
    let value = match prediction {
        Prediction::Ranked(r) => Value::from(r.answers.clone()),
        Prediction::Binary(b) => Value::from(b.as_str()),
    };
    let mut map = serde_json::Map::new();
    map.insert(id.to_string(), value);
    Value::Object(map)
}

/// Reads a predictions file in input order. Answers are normalized again so
/// externally produced files score the same way as runner output.
pub fn read_predictions(path: &Path, cap: usize) -> Result<Vec<(String, Prediction)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Scoring(format!("cannot read {}: {e}", path.display())))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| CliError::Scoring(format!("{}:{}: {reason}", path.display(), i + 1));
        let value: Value = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(bad("expected a JSON object"));
        };
        if map.len() != 1 {
            return Err(bad("expected exactly one question id per line"));
        }
        let (id, v) = map.into_iter().next().expect("one entry");
        let prediction = match v {
            Value::Array(items) => {
                let strings: Vec<String> = items
                    .into_iter()
                    .map(|x| match x {
                        Value::String(s) => Ok(s),
                        _ => Err(bad("answers must be strings")),
                    })
                    .collect::<Result<_, _>>()?;
                Prediction::Ranked(RankedAnswers::from_candidates(&id, strings.iter().map(String::as_str), cap))
            }
            Value::String(s) => Prediction::Binary(parse_binary_answer(&s)),
            _ => return Err(bad("prediction must be a list of answers or a yes/no string")),
        };
        if !seen.insert(id.clone()) {
            return Err(bad(&format!("duplicate prediction for {id:?}")));
        }
        out.push((id, prediction));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreOutcome {
    pub score_config: ScoreConfig,
    pub matcher: String,
    pub aggregate: AggregateScores,
    /// Dataset questions with no prediction; each scored as empty.
    pub missing_predictions: Vec<String>,
    #[serde(skip)]
    pub scores: Vec<QuestionScore>,
}

/// Scores every dataset question in file order. Predictions for unknown
/// ids are an error; missing predictions are listed and score zero.
pub fn score_all(
    questions: &[QuestionRecord],
    predictions: &[(String, Prediction)],
    matcher: &Matcher,
    config: &ScoreConfig,
) -> Result<ScoreOutcome, CliError> {
    let known: HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    if let Some((id, _)) = predictions.iter().find(|(id, _)| !known.contains(id.as_str())) {
        return Err(CliError::Scoring(format!("unknown question id {id:?} in predictions")));
    }
    let by_id: BTreeMap<&str, &Prediction> = predictions.iter().map(|(id, p)| (id.as_str(), p)).collect();
    let mut missing = Vec::new();
    let mut scores = Vec::with_capacity(questions.len());
    for q in questions {
        let prediction = by_id.get(q.id.as_str()).copied();
        if prediction.is_none() {
            missing.push(q.id.clone());
        }
        scores.push(score_question(q, prediction, matcher, config).map_err(|e| CliError::Scoring(e.to_string()))?);
    }
    let aggregate = aggregate(&scores).map_err(|e| CliError::Scoring(e.to_string()))?;
    Ok(ScoreOutcome {
        score_config: config.clone(),
        matcher: matcher.name().to_string(),
        aggregate,
        missing_predictions: missing,
        scores,
    })
}

/// Writes `scores.jsonl`, `score_report.json` and `score_report.txt` to
/// `out_dir`.
pub fn cmd_score(
    predictions: &Path,
    dataset: &DatasetConfig,
    scoring: &ScoringSection,
    answer_cap: usize,
    out_dir: &Path,
) -> Result<ScoreOutcome, CliError> {
    let config = scoring.score_config();
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let questions = load_questions(dataset)?;
    let matcher = build_matcher(scoring)?;
    let predictions = read_predictions(predictions, answer_cap)?;
    let outcome = score_all(&questions, &predictions, &matcher, &config)?;

    let scoring_err = |e: CliError| CliError::Scoring(e.to_string());
    write_file(&out_dir.join("scores.jsonl"), jsonl(&outcome.scores)).map_err(scoring_err)?;
    let json = serde_json::to_string_pretty(&outcome).expect("report serializes") + "\n";
    write_file(&out_dir.join("score_report.json"), json).map_err(scoring_err)?;
    let mut text = render_table(
        "Predictions",
        &[TableRow {
            label: predictions_label(&outcome),
            scores: outcome.aggregate.clone(),
        }],
        &config,
    );
    if !outcome.missing_predictions.is_empty() {
        text.push_str(&format!(
            "\nMissing predictions ({}): {}\n",
            outcome.missing_predictions.len(),
            outcome.missing_predictions.join(", ")
        ));
    }
    write_file(&out_dir.join("score_report.txt"), text).map_err(scoring_err)?;
    Ok(outcome)
}

fn predictions_label(outcome: &ScoreOutcome) -> String {
    format!("{} ({})", outcome.matcher, outcome.aggregate.n_questions)
}
