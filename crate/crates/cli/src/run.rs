//! `run`: one variant over one dataset, repeated, with full persistence.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use proto_harness_core::dataset::{load_exemplars, ExemplarSet, QuestionKind, QuestionRecord};
use proto_harness_core::decoding::{run_variant, BinaryAnswer, DecodeError, Prediction, RankedAnswers, RunContext, VariantOutcome};
use proto_harness_core::gateway::{
    Backend, CompletionCache, Gateway, HttpBackend, HttpConfig, MockBackend, RetryPolicy,
};
use proto_harness_core::prompt::{PromptConfig, PromptVariant, TemplateSet};
use proto_harness_core::scorer::Matcher;
use serde::Serialize;

use crate::config::{BackendKind, DatasetKind, RunConfig, SNAPSHOT_FILE};
use crate::report::{build_report, repetition_dir, write_report, SCORES_FILE};
use crate::score::{build_matcher, load_questions, prediction_line, score_all};
use crate::{jsonl, write_file, CliError};

/// Everything a run needs, loaded and checked before the first request.
pub struct Prepared {
    pub config: RunConfig,
    pub questions: Vec<QuestionRecord>,
    pub prompt: PromptConfig,
    pub variant: PromptVariant,
    pub matcher: Matcher,
    pub backend: Arc<dyn Backend>,
    pub cache: Option<Arc<CompletionCache>>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn prompt_config(config: &RunConfig) -> Result<PromptConfig, CliError> {
    let p = &config.prompt;
    let exemplars = match &p.exemplars {
        Some(path) => load_exemplars(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?,
        None => ExemplarSet::default(),
    };
    let templates = match &p.templates_dir {
        Some(dir) => TemplateSet::with_overrides(dir).map_err(|e| config_error(format!("{}: {e}", dir.display())))?,
        None => TemplateSet::default(),
    };
    Ok(PromptConfig {
        task_fragment: p.task_fragment.clone(),
        answer_count_instruction: p.answer_instruction.clone(),
        generalization_fragment: p.generalization_fragment.clone(),
        binary_instruction: p.binary_instruction.clone(),
        exemplars,
        templates,
    })
}

fn backend(config: &RunConfig) -> Result<Arc<dyn Backend>, CliError> {
    let b = &config.backend;
    match b.kind {
        BackendKind::Mock => {
            let path = b.fixtures.as_ref().ok_or_else(|| config_error("backend.fixtures is required"))?;
            let mock = MockBackend::from_file(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            Ok(Arc::new(mock))
        }
        BackendKind::Http => {
            let http = HttpConfig {
                endpoint: b.endpoint.clone(),
                credential_env: b.credential_env.clone(),
                timeout: Duration::from_secs(b.timeout_secs),
                retry: RetryPolicy {
                    max_attempts: b.max_attempts,
                    base_delay: Duration::from_millis(b.base_delay_ms),
                    ..RetryPolicy::default()
                },
            };
            Ok(Arc::new(HttpBackend::from_env(http).map_err(|e| config_error(e.to_string()))?))
        }
    }
}

/// Validates the configuration and loads every input. No backend traffic.
pub fn prepare(config: RunConfig) -> Result<Prepared, CliError> {
    config.check()?;
    let questions = load_questions(&config.dataset)?;
    let prompt = prompt_config(&config)?;
    let variant = PromptVariant::from_tag(config.variant, config.decoding.n_paths);
    let kind = match config.dataset.kind {
        DatasetKind::Clustered => QuestionKind::Clustered,
        DatasetKind::Binary => QuestionKind::Binary,
    };
    prompt
        .validate(variant, kind)
        .map_err(|e| config_error(format!("prompt: {e}")))?;
    let matcher = build_matcher(&config.scoring)?;
    let backend = backend(&config)?;
    let cache = match &config.run.cache {
        Some(path) => {
            let cache = CompletionCache::open(path).map_err(|e| config_error(format!("cache: {e}")))?;
            for problem in cache.corrupt_lines() {
                log::warn!("cache {}: {problem}", path.display());
            }
            Some(Arc::new(cache))
        }
        None => None,
    };
    Ok(Prepared {
        config,
        questions,
        prompt,
        variant,
        matcher,
        backend,
        cache,
    })
}

#[derive(Debug, Clone, Serialize)]
struct FailureLine<'a> {
    id: &'a str,
    kind: &'static str,
    detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    /// Questions whose backend calls failed, over all repetitions.
    pub failures: usize,
    pub empty_extractions: usize,
    /// Requests that reached the backend (cache hits excluded).
    pub backend_calls: usize,
    pub report_text: String,
}

impl RunSummary {
    pub fn is_clean(&self) -> bool {
        self.failures == 0
    }
}

fn empty_prediction(q: &QuestionRecord) -> Prediction {
    match q.kind() {
        QuestionKind::Clustered => Prediction::Ranked(RankedAnswers::empty(&q.id)),
        QuestionKind::Binary => Prediction::Binary(BinaryAnswer::Unparseable),
    }
}

async fn run_repetition(
    p: &Prepared,
    gateway: &Gateway,
    rep: u32,
) -> Vec<Result<VariantOutcome, DecodeError>> {
    let sample_label = format!("{}/rep-{rep}", p.config.run.seed_label);
    let ctx = RunContext {
        gateway,
        params: &p.config.sampling,
        sample_label: &sample_label,
        answer_cap: p.config.decoding.answer_cap,
    };
    let ctx = &ctx;
    stream::iter(&p.questions)
        .map(|q| async move { run_variant(q, p.variant, &p.prompt, ctx).await })
        .buffered(p.config.run.parallelism)
        .collect()
        .await
}

/// Runs every repetition of a prepared configuration and writes the run
/// directory:
///
/// ```text
/// config.toml                effective configuration
/// rep-N/predictions.jsonl    {"<id>": [answers]} or {"<id>": "yes"}
/// rep-N/traces.jsonl         evidence and path traces
/// rep-N/completions.jsonl    every completion record, in question order
/// rep-N/failures.jsonl       failed questions and empty extractions
/// rep-N/scores.jsonl         per-question metrics
/// report.json, report.txt    means and per-repetition rows
/// ```
pub async fn execute(p: &Prepared) -> Result<RunSummary, CliError> {
    let dir = p.config.run.output_dir.clone();
    write_file(&dir.join(SNAPSHOT_FILE), p.config.to_flat_toml())?;

    let mut gateway = Gateway::new(p.backend.clone(), p.config.run.parallelism);
    if let Some(cache) = &p.cache {
        gateway = gateway.with_cache(cache.clone());
    }
    let score_config = p.config.scoring.score_config();
    let mut failures = 0;
    let mut empty_extractions = 0;

    for rep in 1..=p.config.run.repetitions {
        let outcomes = run_repetition(p, &gateway, rep).await;
        let mut predictions = Vec::new();
        let mut traces = Vec::new();
        let mut records = Vec::new();
        let mut problems = Vec::new();
        for (q, outcome) in p.questions.iter().zip(outcomes) {
            match outcome {
                Ok(o) => {
                    if o.empty_extraction {
                        empty_extractions += 1;
                        problems.push(FailureLine {
                            id: &q.id,
                            kind: "empty_extraction",
                            detail: o.records.last().map(|r| r.raw_text.clone()).unwrap_or_default(),
                        });
                    }
                    predictions.push((q.id.clone(), o.prediction));
                    traces.extend(o.trace);
                    records.extend(o.records);
                }
                Err(e) => {
                    failures += 1;
                    log::error!("rep {rep}, question {}: {e}", q.id);
                    problems.push(FailureLine {
                        id: &q.id,
                        kind: "backend",
                        detail: e.to_string(),
                    });
                    predictions.push((q.id.clone(), empty_prediction(q)));
                }
            }
        }
        let outcome = score_all(&p.questions, &predictions, &p.matcher, &score_config)
            .map_err(|e| CliError::Scoring(e.to_string()))?;

        let rep_dir = repetition_dir(&dir, rep);
        write_file(
            &rep_dir.join("predictions.jsonl"),
            jsonl(predictions.iter().map(|(id, pred)| prediction_line(id, pred))),
        )?;
        write_file(&rep_dir.join("traces.jsonl"), jsonl(&traces))?;
        write_file(&rep_dir.join("completions.jsonl"), jsonl(&records))?;
        write_file(&rep_dir.join("failures.jsonl"), jsonl(&problems))?;
        write_file(&rep_dir.join(SCORES_FILE), jsonl(&outcome.scores))?;
    }

    // The report is rebuilt from the files just written, so it can always
    // be reproduced from the run directory alone.
    let report = build_report(std::slice::from_ref(&dir))?;
    write_report(&report, &dir)?;
    Ok(RunSummary {
        run_dir: dir,
        failures,
        empty_extractions,
        backend_calls: gateway.backend_calls(),
        report_text: crate::report::render_report(&report),
    })
}

pub async fn cmd_run(config: RunConfig) -> Result<RunSummary, CliError> {
    let prepared = prepare(config)?;
    execute(&prepared).await
}
