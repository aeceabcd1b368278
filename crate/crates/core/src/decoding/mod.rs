//! From raw completions to ranked answers, and the per-variant execution
//! graph that produces those completions.

mod binary;
mod extract;
mod normalize;
mod runner;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::prompt::{PromptError, StageKind};

pub use binary::{parse_binary_answer, BinaryAnswer};
pub use extract::{candidate_strings, extract_answers, RankedAnswers, DEFAULT_ANSWER_CAP};
pub use normalize::normalize_answer;
pub use runner::{
    run_variant, EvidenceTrace, PathTrace, Prediction, RunContext, TraceMode, VariantOutcome,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("no answer could be extracted from the completion")]
    EmptyExtraction,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{stage} stage{}: {source}", path_suffix(*.path_index))]
    Stage {
        stage: StageKind,
        path_index: Option<u32>,
        #[source]
        source: GatewayError,
    },
}

fn path_suffix(path_index: Option<u32>) -> String {
    path_index.map(|i| format!(" (path {i})")).unwrap_or_default()
}
