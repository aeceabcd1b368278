use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendReply, CompletionRequest, GatewayError};
use crate::prompt::StageKind;

/// One canned completion. Addressed either by exact request key or by the
/// `(question_id, stage, path_index)` triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<StageKind>,
    #[serde(default)]
    pub path_index: u32,
    pub text: String,
}

impl FixtureEntry {
    pub fn for_stage(question_id: &str, stage: StageKind, path_index: u32, text: &str) -> Self {
        Self {
            request_key: None,
            question_id: Some(question_id.into()),
            stage: Some(stage),
            path_index,
            text: text.into(),
        }
    }
}

/// Deterministic replay backend. Unknown requests are errors; it never
/// makes text up.
#[derive(Debug, Default)]
pub struct MockBackend {
    by_key: HashMap<String, String>,
    by_stage: HashMap<(String, StageKind, u32), String>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub const ID: &'static str = "mock";

    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Result<Self, GatewayError> {
        let mut mock = Self::default();
        for (i, e) in entries.into_iter().enumerate() {
            match (e.request_key, e.question_id, e.stage) {
                (Some(key), _, _) => {
                    mock.by_key.insert(key, e.text);
                }
                (None, Some(q), Some(stage)) => {
                    mock.by_stage.insert((q, stage, e.path_index), e.text);
                }
                _ => {
                    return Err(GatewayError::Config(format!(
                        "fixture entry {} needs request_key or question_id+stage",
                        i + 1
                    )))
                }
            }
        }
        Ok(mock)
    }

    /// Reads a line-delimited fixture file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("mock fixture {}: {e}", path.display())))?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<FixtureEntry>(l).map_err(|e| {
                    GatewayError::Config(format!("{} line {}: {e}", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn lookup(&self, request: &CompletionRequest) -> Result<&str, GatewayError> {
        let key = request.key(Self::ID);
        if let Some(text) = self.by_key.get(&key) {
            return Ok(text);
        }
        let triple = (request.question_id.clone(), request.stage, request.path_index);
        self.by_stage.get(&triple).map(String::as_str).ok_or_else(|| {
            GatewayError::UnknownFixtureKey(format!(
                "{key} (question {:?}, stage {}, path {})",
                request.question_id, request.stage, request.path_index
            ))
        })
    }
}

#[async_trait]
impl Backend for MockBackend {
    fn id(&self) -> &str {
        Self::ID
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.lookup(request).map(BackendReply::text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::SamplingParams;
    use crate::prompt::Message;

    fn request(q: &str, stage: StageKind, path: u32) -> CompletionRequest {
        CompletionRequest {
            messages: vec![Message::user("same prompt")],
            params: SamplingParams::default(),
            path_index: path,
            sample_label: "rep1".into(),
            question_id: q.into(),
            stage,
        }
    }

    #[tokio::test]
    async fn canned_text_is_stable() {
        let mock = MockBackend::new([FixtureEntry::for_stage("q1", StageKind::Answer, 0, "1. dog")]).unwrap();
        let r = request("q1", StageKind::Answer, 0);
        let a = mock.complete(&r).await.unwrap();
        let b = mock.complete(&r).await.unwrap();
        assert_eq!(a.text, "1. dog");
        assert_eq!(a, b);
        assert_eq!(mock.calls(), 2);
    }

    #[tokio::test]
    async fn unknown_key_is_error() {
        let mock = MockBackend::new([]).unwrap();
        let err = mock.complete(&request("q1", StageKind::Answer, 0)).await.unwrap_err();
        assert!(matches!(err, GatewayError::UnknownFixtureKey(_)));
    }

    #[tokio::test]
    async fn path_index_selects_distinct_text() {
        let mock = MockBackend::new([
            FixtureEntry::for_stage("q1", StageKind::PathSample, 0, "path zero"),
            FixtureEntry::for_stage("q1", StageKind::PathSample, 1, "path one"),
        ])
        .unwrap();
        let a = mock.complete(&request("q1", StageKind::PathSample, 0)).await.unwrap();
        let b = mock.complete(&request("q1", StageKind::PathSample, 1)).await.unwrap();
        assert_ne!(a.text, b.text);
    }

    #[tokio::test]
    async fn exact_request_key_takes_precedence() {
        let r = request("q1", StageKind::Answer, 0);
        let mock = MockBackend::new([
            FixtureEntry::for_stage("q1", StageKind::Answer, 0, "by triple"),
            FixtureEntry {
                request_key: Some(r.key(MockBackend::ID)),
                question_id: None,
                stage: None,
                path_index: 0,
                text: "by key".into(),
            },
        ])
        .unwrap();
        assert_eq!(mock.complete(&r).await.unwrap().text, "by key");
    }

    #[test]
    fn fixture_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        fs::write(
            &path,
            "{\"question_id\":\"q1\",\"stage\":\"answer\",\"text\":\"x\"}\n\n{\"text\":\"orphan\"}\n",
        )
        .unwrap();
        assert!(matches!(MockBackend::from_file(&path), Err(GatewayError::Config(_))));
        fs::write(&path, "{\"question_id\":\"q1\",\"stage\":\"answer\",\"text\":\"x\"}\n").unwrap();
        assert!(MockBackend::from_file(&path).is_ok());
    }
}
