use futures::future::join_all;
use serde::{Deserialize, Serialize};

use super::{extract_answers, parse_binary_answer, BinaryAnswer, DecodeError, RankedAnswers};
use crate::dataset::{QuestionKind, QuestionRecord};
use crate::gateway::{CompletionRecord, CompletionRequest, Gateway, SamplingParams};
use crate::prompt::{
    bind_evidence, bind_paths, build_bundle, PromptConfig, PromptVariant, Stage, StageKind,
};

pub struct RunContext<'a> {
    pub gateway: &'a Gateway,
    pub params: &'a SamplingParams,
    /// Repetition label folded into every request key.
    pub sample_label: &'a str,
    pub answer_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Prediction {
    Ranked(RankedAnswers),
    Binary(BinaryAnswer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    Thinking,
    Knowledge,
    DiversePath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTrace {
    pub path_index: u32,
    pub raw_text: String,
    /// Answers extracted from this path alone (a single label for yes/no).
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceTrace {
    pub question_id: String,
    pub mode: TraceMode,
    /// Elicited evidence, verbatim. Absent for diverse-path runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathTrace>,
}

#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub prediction: Prediction,
    pub trace: Option<EvidenceTrace>,
    /// Every completion used, in stage order.
    pub records: Vec<CompletionRecord>,
    /// The final completion yielded no answers; scored as empty.
    pub empty_extraction: bool,
}

impl VariantOutcome {
    pub fn request_keys(&self) -> Vec<String> {
        self.records.iter().map(|r| r.request_key.clone()).collect()
    }
}

async fn call(ctx: &RunContext<'_>, stage: &Stage) -> Result<CompletionRecord, DecodeError> {
    let request = CompletionRequest {
        messages: stage.messages().to_vec(),
        params: ctx.params.clone(),
        path_index: stage.path_index.unwrap_or(0),
        sample_label: ctx.sample_label.to_string(),
        question_id: stage.question_id.clone(),
        stage: stage.kind,
    };
    ctx.gateway
        .complete(&request)
        .await
        .map(|c| c.record)
        .map_err(|source| DecodeError::Stage {
            stage: stage.kind,
            path_index: stage.path_index,
            source,
        })
}

fn final_prediction(
    question: &QuestionRecord,
    raw: &str,
    cap: usize,
) -> Result<(Prediction, bool), DecodeError> {
    match question.kind() {
        QuestionKind::Binary => Ok((Prediction::Binary(parse_binary_answer(raw)), false)),
        QuestionKind::Clustered => match extract_answers(&question.id, raw, cap) {
            Ok(r) => Ok((Prediction::Ranked(r), false)),
            Err(DecodeError::EmptyExtraction) => {
                let mut empty = RankedAnswers::empty(&question.id);
                empty.raw_sources.push(raw.to_string());
                Ok((Prediction::Ranked(empty), true))
            }
            Err(e) => Err(e),
        },
    }
}

fn path_candidates(question: &QuestionRecord, raw: &str, cap: usize) -> Vec<String> {
    match question.kind() {
        QuestionKind::Binary => vec![parse_binary_answer(raw).as_str().to_string()],
        QuestionKind::Clustered => extract_answers(&question.id, raw, cap)
            .map(|r| r.answers)
            .unwrap_or_default(),
    }
}

/// Executes one question under one variant.
///
/// Single-shot variants make one call; evidence variants elicit evidence,
/// bind it, then answer; diverse-path samples every path concurrently,
/// binds the raw path texts and makes one summarize call.
pub async fn run_variant(
    question: &QuestionRecord,
    variant: PromptVariant,
    config: &PromptConfig,
    ctx: &RunContext<'_>,
) -> Result<VariantOutcome, DecodeError> {
    let bundle = build_bundle(question, variant, config)?;
    let cap = ctx.answer_cap;

    match variant {
        PromptVariant::Baseline | PromptVariant::TaskRelevant => {
            let record = call(ctx, &bundle.stages[0]).await?;
            let (prediction, empty) = final_prediction(question, &record.raw_text, cap)?;
            Ok(VariantOutcome {
                prediction,
                trace: None,
                records: vec![record],
                empty_extraction: empty,
            })
        }
        PromptVariant::EvidenceThinking | PromptVariant::EvidenceKnowledge => {
            let elicit = bundle
                .stage(StageKind::ElicitEvidence)
                .expect("evidence bundle has an elicit stage");
            let evidence = call(ctx, elicit).await?;
            let bound = bind_evidence(bundle.clone(), &evidence.raw_text)?;
            let answer_stage = bound
                .stage(StageKind::Answer)
                .expect("evidence bundle has an answer stage");
            let answer = call(ctx, answer_stage).await?;
            let (prediction, empty) = final_prediction(question, &answer.raw_text, cap)?;
            let mode = if variant == PromptVariant::EvidenceThinking {
                TraceMode::Thinking
            } else {
                TraceMode::Knowledge
            };
            Ok(VariantOutcome {
                prediction,
                trace: Some(EvidenceTrace {
                    question_id: question.id.clone(),
                    mode,
                    text: Some(evidence.raw_text.clone()),
                    paths: Vec::new(),
                }),
                records: vec![evidence, answer],
                empty_extraction: empty,
            })
        }
        PromptVariant::DiversePath { .. } => {
            let samples = join_all(bundle.stages_of(StageKind::PathSample).map(|s| call(ctx, s))).await;
            let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
            let raw: Vec<String> = samples.iter().map(|r| r.raw_text.clone()).collect();
            let bound = bind_paths(bundle.clone(), &raw)?;
            let summarize = bound
                .stage(StageKind::Summarize)
                .expect("diverse-path bundle has a summarize stage");
            let summary = call(ctx, summarize).await?;
            let (prediction, empty) = final_prediction(question, &summary.raw_text, cap)?;
            let paths = samples
                .iter()
                .map(|r| PathTrace {
                    path_index: r.path_index,
                    raw_text: r.raw_text.clone(),
                    candidates: path_candidates(question, &r.raw_text, cap),
                })
                .collect();
            let mut records = samples;
            records.push(summary);
            Ok(VariantOutcome {
                prediction,
                trace: Some(EvidenceTrace {
                    question_id: question.id.clone(),
                    mode: TraceMode::DiversePath,
                    text: None,
                    paths,
                }),
                records,
                empty_extraction: empty,
            })
        }
    }
}
