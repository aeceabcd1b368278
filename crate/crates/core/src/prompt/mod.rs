//! Message-sequence builders for the five prompt variants.
//!
//! A [`PromptBundle`] is an ordered list of stages. Stages whose content
//! depends on an earlier completion (the evidence-conditioned answer, the
//! summarize step) are built unrendered and filled in by [`bind_evidence`]
//! and [`bind_paths`].

mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ExemplarSet, QuestionKind, QuestionRecord};

pub use template::{placeholders, render, template_key, TemplateSet};

pub const DEFAULT_TASK_FRAGMENT: &str = "based on common societal norms and practices";
pub const DEFAULT_ANSWER_INSTRUCTION: &str =
    "give me 10 answers and most answers should only be one word.";
pub const DEFAULT_GENERALIZATION_FRAGMENT: &str = "Based on social common sense";
pub const DEFAULT_BINARY_INSTRUCTION: &str = "answer with only yes or no.";
pub const DEFAULT_N_PATHS: u32 = 3;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("incomplete config for {variant}: {missing}")]
    IncompleteConfig { variant: VariantTag, missing: String },
    #[error("template placeholder {{{0}}} has no value")]
    MissingPlaceholder(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("empty question text")]
    EmptyQuestion,
    #[error("bundle for {0} has no stage of that kind")]
    WrongVariant(VariantTag),
    #[error("evidence must be non-empty")]
    EmptyEvidence,
    #[error("stage already bound")]
    AlreadyBound,
    #[error("expected {expected} path outputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("unknown prompt variant {0:?}")]
    UnknownVariant(String),
}

/// Variant identity without parameters; ordered prompt0..prompt4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTag {
    Baseline,
    TaskRelevant,
    EvidenceThinking,
    EvidenceKnowledge,
    DiversePath,
}

impl VariantTag {
    pub const ALL: [VariantTag; 5] = [
        VariantTag::Baseline,
        VariantTag::TaskRelevant,
        VariantTag::EvidenceThinking,
        VariantTag::EvidenceKnowledge,
        VariantTag::DiversePath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantTag::Baseline => "baseline",
            VariantTag::TaskRelevant => "task_relevant",
            VariantTag::EvidenceThinking => "evidence_thinking",
            VariantTag::EvidenceKnowledge => "evidence_knowledge",
            VariantTag::DiversePath => "diverse_path",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            VariantTag::Baseline => "Prompt0",
            VariantTag::TaskRelevant => "Prompt1",
            VariantTag::EvidenceThinking => "Prompt2",
            VariantTag::EvidenceKnowledge => "Prompt3",
            VariantTag::DiversePath => "Prompt4",
        }
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantTag {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_lowercase().replace('-', "_");
        VariantTag::ALL
            .into_iter()
            .find(|t| t.as_str() == key || t.label().to_lowercase() == key)
            .ok_or_else(|| PromptError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptVariant {
    Baseline,
    TaskRelevant,
    EvidenceThinking,
    EvidenceKnowledge,
    DiversePath { n_paths: u32 },
}

impl PromptVariant {
    pub fn from_tag(tag: VariantTag, n_paths: u32) -> Self {
        match tag {
            VariantTag::Baseline => PromptVariant::Baseline,
            VariantTag::TaskRelevant => PromptVariant::TaskRelevant,
            VariantTag::EvidenceThinking => PromptVariant::EvidenceThinking,
            VariantTag::EvidenceKnowledge => PromptVariant::EvidenceKnowledge,
            VariantTag::DiversePath => PromptVariant::DiversePath { n_paths },
        }
    }

    pub fn diverse_path() -> Self {
        PromptVariant::DiversePath {
            n_paths: DEFAULT_N_PATHS,
        }
    }

    pub fn tag(self) -> VariantTag {
        match self {
            PromptVariant::Baseline => VariantTag::Baseline,
            PromptVariant::TaskRelevant => VariantTag::TaskRelevant,
            PromptVariant::EvidenceThinking => VariantTag::EvidenceThinking,
            PromptVariant::EvidenceKnowledge => VariantTag::EvidenceKnowledge,
            PromptVariant::DiversePath { .. } => VariantTag::DiversePath,
        }
    }

    /// Number of backend calls one question costs under this variant.
    pub fn backend_calls(self) -> usize {
        match self {
            PromptVariant::Baseline | PromptVariant::TaskRelevant => 1,
            PromptVariant::EvidenceThinking | PromptVariant::EvidenceKnowledge => 2,
            PromptVariant::DiversePath { n_paths } => n_paths as usize + 1,
        }
    }

    fn uses_task_fragment(self) -> bool {
        !matches!(self, PromptVariant::Baseline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    ElicitEvidence,
    Answer,
    PathSample,
    Summarize,
}

impl StageKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            StageKind::ElicitEvidence => "elicit",
            StageKind::Answer => "answer",
            StageKind::PathSample => "path_sample",
            StageKind::Summarize => "summarize",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::ElicitEvidence => "elicit_evidence",
            StageKind::Answer => "answer",
            StageKind::PathSample => "path_sample",
            StageKind::Summarize => "summarize",
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pending {
    template: String,
    vars: BTreeMap<&'static str, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub kind: StageKind,
    pub question_id: String,
    pub path_index: Option<u32>,
    messages: Vec<Message>,
    /// Final user turn still waiting for evidence or path outputs.
    pending: Option<Pending>,
}

impl Stage {
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn is_ready(&self) -> bool {
        self.pending.is_none()
    }

    fn bind(&mut self, name: &'static str, value: String) -> Result<(), PromptError> {
        let mut pending = self.pending.take().ok_or(PromptError::AlreadyBound)?;
        pending.vars.insert(name, value);
        match render(&pending.template, &pending.vars) {
            Ok(text) => {
                self.messages.push(Message::user(text));
                Ok(())
            }
            Err(e) => {
                self.pending = Some(pending);
                Err(e)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub variant: PromptVariant,
    pub question_id: String,
    pub stages: Vec<Stage>,
}

impl PromptBundle {
    pub fn stage(&self, kind: StageKind) -> Option<&Stage> {
        self.stages.iter().find(|s| s.kind == kind)
    }

    pub fn stages_of(&self, kind: StageKind) -> impl Iterator<Item = &Stage> {
        self.stages.iter().filter(move |s| s.kind == kind)
    }

    fn stage_mut(&mut self, kind: StageKind) -> Option<&mut Stage> {
        self.stages.iter_mut().find(|s| s.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    pub task_fragment: String,
    pub answer_count_instruction: String,
    pub generalization_fragment: String,
    /// Replaces the answer-count instruction for yes/no questions.
    pub binary_instruction: String,
    pub exemplars: ExemplarSet,
    pub templates: TemplateSet,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            task_fragment: DEFAULT_TASK_FRAGMENT.into(),
            answer_count_instruction: DEFAULT_ANSWER_INSTRUCTION.into(),
            generalization_fragment: DEFAULT_GENERALIZATION_FRAGMENT.into(),
            binary_instruction: DEFAULT_BINARY_INSTRUCTION.into(),
            exemplars: ExemplarSet::default(),
            templates: TemplateSet::default(),
        }
    }
}

impl PromptConfig {
    fn fragment_for(&self, kind: QuestionKind) -> (&str, &'static str) {
        match kind {
            QuestionKind::Clustered => (&self.task_fragment, "task_fragment"),
            QuestionKind::Binary => (&self.generalization_fragment, "generalization_fragment"),
        }
    }

    fn instruction_for(&self, kind: QuestionKind) -> (&str, &'static str) {
        match kind {
            QuestionKind::Clustered => (&self.answer_count_instruction, "answer_count_instruction"),
            QuestionKind::Binary => (&self.binary_instruction, "binary_instruction"),
        }
    }

    /// Checks that every field the variant reads is present, and that its
    /// templates carry the placeholders the stage contract depends on.
    pub fn validate(&self, variant: PromptVariant, kind: QuestionKind) -> Result<(), PromptError> {
        let tag = variant.tag();
        let incomplete = |missing: String| PromptError::IncompleteConfig {
            variant: tag,
            missing,
        };
        let (instruction, instruction_name) = self.instruction_for(kind);
        if instruction.trim().is_empty() {
            return Err(incomplete(instruction_name.into()));
        }
        if variant.uses_task_fragment() {
            let (fragment, name) = self.fragment_for(kind);
            if fragment.trim().is_empty() {
                return Err(incomplete(name.into()));
            }
        }
        if tag == VariantTag::Baseline && self.exemplars.is_empty() {
            return Err(incomplete("exemplars (few-shot baseline needs at least one)".into()));
        }
        if let PromptVariant::DiversePath { n_paths: 0 } = variant {
            return Err(incomplete("n_paths must be positive".into()));
        }
        for (stage, required) in stage_requirements(variant) {
            let text = self.templates.get(tag, *stage)?;
            let present = placeholders(text);
            for name in *required {
                if !present.contains(name) {
                    return Err(incomplete(format!(
                        "template {} lacks {{{name}}}",
                        template_key(tag, *stage)
                    )));
                }
            }
            if present.contains(&"evidence") {
                let pos = |n: &str| text.find(&format!("{{{n}}}"));
                if pos("evidence") > pos("question") {
                    return Err(incomplete(format!(
                        "template {} must place {{evidence}} before {{question}}",
                        template_key(tag, *stage)
                    )));
                }
            }
        }
        Ok(())
    }
}

type Requirements = &'static [(StageKind, &'static [&'static str])];

fn stage_requirements(variant: PromptVariant) -> Requirements {
    use StageKind::*;
    match variant {
        PromptVariant::Baseline => &[(Answer, &["question", "answer_instruction"])],
        PromptVariant::TaskRelevant => {
            &[(Answer, &["question", "answer_instruction", "task_fragment"])]
        }
        PromptVariant::EvidenceThinking | PromptVariant::EvidenceKnowledge => &[
            (ElicitEvidence, &["question"]),
            (Answer, &["evidence", "question", "answer_instruction"]),
        ],
        PromptVariant::DiversePath { .. } => &[
            (PathSample, &["question", "answer_instruction"]),
            (Summarize, &["question", "paths", "answer_instruction"]),
        ],
    }
}

fn exemplar_messages(exemplars: &ExemplarSet) -> Vec<Message> {
    let mut out = Vec::with_capacity(exemplars.len() * 2);
    for ex in &exemplars.exemplars {
        out.push(Message::user(format!("Question: {}", ex.question)));
        let reply = match ex.answers.as_slice() {
            [single] => single.clone(),
            many => many
                .iter()
                .enumerate()
                .map(|(i, a)| format!("{}. {a}", i + 1))
                .collect::<Vec<_>>()
                .join("\n"),
        };
        out.push(Message::assistant(reply));
    }
    out
}

/// Builds the stage sequence for one question. Pure: equal inputs give
/// byte-identical messages.
pub fn build_bundle(
    question: &QuestionRecord,
    variant: PromptVariant,
    config: &PromptConfig,
) -> Result<PromptBundle, PromptError> {
    if question.text.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    let kind = question.kind();
    config.validate(variant, kind)?;
    let tag = variant.tag();

    let mut vars: BTreeMap<&'static str, String> = BTreeMap::new();
    vars.insert("question", question.text.clone());
    vars.insert("answer_instruction", config.instruction_for(kind).0.to_string());
    vars.insert("task_fragment", config.fragment_for(kind).0.to_string());

    let shots = exemplar_messages(&config.exemplars);
    let ready = |stage: StageKind, path_index: Option<u32>, few_shot: bool| -> Result<Stage, PromptError> {
        let mut messages = if few_shot { shots.clone() } else { Vec::new() };
        messages.push(Message::user(render(config.templates.get(tag, stage)?, &vars)?));
        Ok(Stage {
            kind: stage,
            question_id: question.id.clone(),
            path_index,
            messages,
            pending: None,
        })
    };
    let pending = |stage: StageKind, few_shot: bool| -> Result<Stage, PromptError> {
        Ok(Stage {
            kind: stage,
            question_id: question.id.clone(),
            path_index: None,
            messages: if few_shot { shots.clone() } else { Vec::new() },
            pending: Some(Pending {
                template: config.templates.get(tag, stage)?.to_string(),
                vars: vars.clone(),
            }),
        })
    };

    let stages = match variant {
        PromptVariant::Baseline | PromptVariant::TaskRelevant => {
            vec![ready(StageKind::Answer, None, true)?]
        }
        PromptVariant::EvidenceThinking | PromptVariant::EvidenceKnowledge => vec![
            ready(StageKind::ElicitEvidence, None, false)?,
            pending(StageKind::Answer, true)?,
        ],
        PromptVariant::DiversePath { n_paths } => {
            let mut stages = (0..n_paths)
                .map(|i| ready(StageKind::PathSample, Some(i), true))
                .collect::<Result<Vec<_>, _>>()?;
            stages.push(pending(StageKind::Summarize, false)?);
            stages
        }
    };
    Ok(PromptBundle {
        variant,
        question_id: question.id.clone(),
        stages,
    })
}

/// Fills the evidence-conditioned Answer stage with the elicited evidence.
pub fn bind_evidence(mut bundle: PromptBundle, evidence: &str) -> Result<PromptBundle, PromptError> {
    if bundle.stage(StageKind::ElicitEvidence).is_none() {
        return Err(PromptError::WrongVariant(bundle.variant.tag()));
    }
    if evidence.trim().is_empty() {
        return Err(PromptError::EmptyEvidence);
    }
    let tag = bundle.variant.tag();
    let answer = bundle
        .stage_mut(StageKind::Answer)
        .ok_or(PromptError::WrongVariant(tag))?;
    answer.bind("evidence", evidence.to_string())?;
    Ok(bundle)
}

/// Formats path outputs as labelled blocks, `[Path 1]` first.
pub fn format_paths(path_outputs: &[String]) -> String {
    path_outputs
        .iter()
        .enumerate()
        .map(|(i, text)| format!("[Path {}]\n{}", i + 1, text.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Fills the Summarize stage with every path's raw output, in path order.
pub fn bind_paths(mut bundle: PromptBundle, path_outputs: &[String]) -> Result<PromptBundle, PromptError> {
    let PromptVariant::DiversePath { n_paths } = bundle.variant else {
        return Err(PromptError::WrongVariant(bundle.variant.tag()));
    };
    if path_outputs.len() != n_paths as usize {
        return Err(PromptError::ArityMismatch {
            expected: n_paths as usize,
            got: path_outputs.len(),
        });
    }
    let summarize = bundle
        .stage_mut(StageKind::Summarize)
        .ok_or(PromptError::WrongVariant(VariantTag::DiversePath))?;
    summarize.bind("paths", format_paths(path_outputs))?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BinaryLabel, Cluster, ClusterSet, Exemplar, Gold};
    use proptest::prelude::*;

    fn clustered(text: &str) -> QuestionRecord {
        QuestionRecord {
            id: "q1".into(),
            text: text.into(),
            gold: Gold::Clusters(
                ClusterSet::new(vec![Cluster {
                    id: "c1".into(),
                    weight: 1,
                    answer_strings: ["x".to_string()].into(),
                }])
                .unwrap(),
            ),
        }
    }

    fn binary(text: &str) -> QuestionRecord {
        QuestionRecord {
            id: "b1".into(),
            text: text.into(),
            gold: Gold::Label(BinaryLabel::Yes),
        }
    }

    fn config() -> PromptConfig {
        PromptConfig {
            exemplars: ExemplarSet {
                exemplars: vec![Exemplar {
                    question: "Name a fruit.".into(),
                    answers: vec!["apple".into(), "banana".into()],
                }],
            },
            ..PromptConfig::default()
        }
    }

    const Q: &str = "Name a place where you might have a long conversation";

    fn last_user(stage: &Stage) -> &str {
        &stage.messages().last().unwrap().content
    }

    #[test]
    fn baseline_single_answer_stage_with_exemplars() {
        let b = build_bundle(&clustered(Q), PromptVariant::Baseline, &config()).unwrap();
        assert_eq!(b.stages.len(), 1);
        let stage = &b.stages[0];
        assert_eq!(stage.kind, StageKind::Answer);
        assert_eq!(stage.messages()[0].content, "Question: Name a fruit.");
        assert_eq!(stage.messages()[1].content, "1. apple\n2. banana");
        let last = last_user(stage);
        assert!(last.contains(Q));
        assert!(last.contains("give me 10 answers and most answers should only be one word."));
        assert!(!last.contains(DEFAULT_TASK_FRAGMENT));
    }

    #[test]
    fn task_relevant_inserts_fragment() {
        let b = build_bundle(&clustered(Q), PromptVariant::TaskRelevant, &config()).unwrap();
        assert_eq!(b.stages.len(), 1);
        let last = last_user(&b.stages[0]);
        assert!(last.contains("based on common societal norms and practices"));
        assert!(last.contains("give me 10 answers"));
        assert_eq!(b.stages[0].messages().len(), 3);
    }

    #[test]
    fn diverse_path_stage_layout() {
        let b = build_bundle(&clustered(Q), PromptVariant::diverse_path(), &config()).unwrap();
        let kinds: Vec<_> = b.stages.iter().map(|s| s.kind).collect();
        use StageKind::*;
        assert_eq!(kinds, vec![PathSample, PathSample, PathSample, Summarize]);
        let idx: Vec<_> = b.stages.iter().map(|s| s.path_index).collect();
        assert_eq!(idx, vec![Some(0), Some(1), Some(2), None]);
        assert!(!b.stages[3].is_ready());
    }

    #[test]
    fn evidence_stage_layout_and_binding() {
        for variant in [PromptVariant::EvidenceThinking, PromptVariant::EvidenceKnowledge] {
            let b = build_bundle(&clustered(Q), variant, &config()).unwrap();
            assert_eq!(b.stages[0].kind, StageKind::ElicitEvidence);
            assert_eq!(b.stages[1].kind, StageKind::Answer);
            assert!(b.stages[0].is_ready());
            assert!(!b.stages[1].is_ready());
            // evidence stage carries no few-shot turns
            assert_eq!(b.stages[0].messages().len(), 1);

            let evidence = "The key is 'a place'. Long talks happen where people sit.";
            let bound = bind_evidence(b.clone(), evidence).unwrap();
            let text = last_user(&bound.stages[1]);
            assert!(text.contains(evidence));
            assert!(text.find(evidence).unwrap() < text.find(Q).unwrap());
            assert!(text.contains("give me 10 answers"));

            assert_eq!(bind_evidence(bound, evidence).unwrap_err(), PromptError::AlreadyBound);
            assert_eq!(bind_evidence(b.clone(), "  ").unwrap_err(), PromptError::EmptyEvidence);
        }
    }

    #[test]
    fn bind_evidence_wrong_variant() {
        let b = build_bundle(&clustered(Q), PromptVariant::TaskRelevant, &config()).unwrap();
        assert_eq!(
            bind_evidence(b, "x").unwrap_err(),
            PromptError::WrongVariant(VariantTag::TaskRelevant)
        );
    }

    #[test]
    fn bind_paths_in_order() {
        let b = build_bundle(&clustered(Q), PromptVariant::diverse_path(), &config()).unwrap();
        let outs: Vec<String> = ["1. coffee shop\n2. patio", "1. cafe\n2. beach", "1. bar"]
            .map(String::from)
            .to_vec();
        let bound = bind_paths(b.clone(), &outs).unwrap();
        let text = last_user(&bound.stages[3]);
        let positions: Vec<_> = outs.iter().map(|o| text.find(o.as_str()).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("[Path 1]") && text.contains("[Path 3]"));
        assert!(text.contains(DEFAULT_TASK_FRAGMENT));
        assert!(text.contains(Q));

        assert_eq!(
            bind_paths(b.clone(), &outs[..2]).unwrap_err(),
            PromptError::ArityMismatch { expected: 3, got: 2 }
        );
        assert_eq!(bind_paths(bound, &outs).unwrap_err(), PromptError::AlreadyBound);
    }

    #[test]
    fn identical_paths_still_bind() {
        let b = build_bundle(&clustered(Q), PromptVariant::diverse_path(), &config()).unwrap();
        let outs = vec!["1. cafe".to_string(); 3];
        let bound = bind_paths(b, &outs).unwrap();
        assert!(bound.stages[3].is_ready());
        assert_eq!(last_user(&bound.stages[3]).matches("1. cafe").count(), 3);
    }

    #[test]
    fn bind_paths_wrong_variant() {
        let b = build_bundle(&clustered(Q), PromptVariant::Baseline, &config()).unwrap();
        assert_eq!(
            bind_paths(b, &[]).unwrap_err(),
            PromptError::WrongVariant(VariantTag::Baseline)
        );
    }

    #[test]
    fn baseline_without_exemplars_is_incomplete() {
        let err = build_bundle(&clustered(Q), PromptVariant::Baseline, &PromptConfig::default())
            .unwrap_err();
        assert!(matches!(err, PromptError::IncompleteConfig { variant: VariantTag::Baseline, .. }));
        // other variants do not require few-shot context
        assert!(build_bundle(&clustered(Q), PromptVariant::TaskRelevant, &PromptConfig::default()).is_ok());
    }

    #[test]
    fn empty_fragment_is_incomplete() {
        let cfg = PromptConfig {
            task_fragment: " ".into(),
            ..config()
        };
        assert!(matches!(
            build_bundle(&clustered(Q), PromptVariant::TaskRelevant, &cfg),
            Err(PromptError::IncompleteConfig { .. })
        ));
        // baseline does not read the task fragment
        assert!(build_bundle(&clustered(Q), PromptVariant::Baseline, &cfg).is_ok());
    }

    #[test]
    fn template_missing_required_placeholder() {
        let mut cfg = config();
        cfg.templates
            .insert(VariantTag::TaskRelevant, StageKind::Answer, "{question} {task_fragment}");
        assert!(matches!(
            build_bundle(&clustered(Q), PromptVariant::TaskRelevant, &cfg),
            Err(PromptError::IncompleteConfig { .. })
        ));
    }

    #[test]
    fn template_unknown_placeholder_is_hard_error() {
        let mut cfg = config();
        cfg.templates.insert(
            VariantTag::Baseline,
            StageKind::Answer,
            "{question} {answer_instruction} {mood}",
        );
        assert_eq!(
            build_bundle(&clustered(Q), PromptVariant::Baseline, &cfg).unwrap_err(),
            PromptError::MissingPlaceholder("mood".into())
        );
    }

    #[test]
    fn binary_uses_yes_no_instruction_and_generalization_fragment() {
        let b = build_bundle(&binary("Is water wet?"), PromptVariant::TaskRelevant, &config()).unwrap();
        let text = last_user(&b.stages[0]);
        assert!(text.contains(DEFAULT_BINARY_INSTRUCTION));
        assert!(text.contains("Based on social common sense"));
        assert!(!text.contains("give me 10 answers"));
        assert!(!text.contains(DEFAULT_TASK_FRAGMENT));
    }

    #[test]
    fn empty_question_rejected() {
        assert_eq!(
            build_bundle(&clustered("  "), PromptVariant::TaskRelevant, &config()).unwrap_err(),
            PromptError::EmptyQuestion
        );
    }

    #[test]
    fn variant_tag_parsing() {
        assert_eq!("diverse-path".parse::<VariantTag>().unwrap(), VariantTag::DiversePath);
        assert_eq!("Prompt1".parse::<VariantTag>().unwrap(), VariantTag::TaskRelevant);
        assert!("prompt9".parse::<VariantTag>().is_err());
    }

    fn any_variant() -> impl Strategy<Value = PromptVariant> {
        prop_oneof![
            Just(PromptVariant::Baseline),
            Just(PromptVariant::TaskRelevant),
            Just(PromptVariant::EvidenceThinking),
            Just(PromptVariant::EvidenceKnowledge),
            (1u32..6).prop_map(|n| PromptVariant::DiversePath { n_paths: n }),
        ]
    }

    proptest! {
        #[test]
        fn stage_order_and_determinism(
            variant in any_variant(),
            question in "[A-Za-z][A-Za-z ?]{0,30}",
            fragment in "[a-z][a-z ]{0,20}",
            n_shots in 1usize..4,
            is_binary in any::<bool>(),
        ) {
            let mut cfg = config();
            cfg.task_fragment = fragment.clone();
            cfg.generalization_fragment = fragment;
            cfg.exemplars.exemplars = (0..n_shots)
                .map(|i| Exemplar { question: format!("E{i}"), answers: vec![format!("a{i}")] })
                .collect();
            let q = if is_binary { binary(&question) } else { clustered(&question) };
            let a = build_bundle(&q, variant, &cfg).unwrap();
            let b = build_bundle(&q, variant, &cfg).unwrap();
            prop_assert_eq!(&a, &b);

            use StageKind::*;
            let kinds: Vec<_> = a.stages.iter().map(|s| s.kind).collect();
            let expected = match variant {
                PromptVariant::Baseline | PromptVariant::TaskRelevant => vec![Answer],
                PromptVariant::EvidenceThinking | PromptVariant::EvidenceKnowledge => vec![ElicitEvidence, Answer],
                PromptVariant::DiversePath { n_paths } => {
                    let mut v = vec![PathSample; n_paths as usize];
                    v.push(Summarize);
                    v
                }
            };
            prop_assert_eq!(kinds.len(), variant.backend_calls());
            prop_assert_eq!(kinds, expected);

            let mut full = a.clone();
            if let PromptVariant::DiversePath { n_paths } = variant {
                full = bind_paths(full, &vec!["p".to_string(); n_paths as usize]).unwrap();
            } else if matches!(variant, PromptVariant::EvidenceThinking | PromptVariant::EvidenceKnowledge) {
                full = bind_evidence(full, "evidence").unwrap();
            }
            for stage in &full.stages {
                prop_assert!(stage.is_ready());
                if matches!(stage.kind, Answer | PathSample) {
                    prop_assert!(last_user(stage).contains(question.as_str()));
                    if !is_binary {
                        prop_assert!(last_user(stage).contains(DEFAULT_ANSWER_INSTRUCTION));
                    }
                }
            }
        }
    }
}
