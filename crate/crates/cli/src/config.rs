//! Run configuration: a TOML file with dotted keys plus `--set key=value`
//! overrides.

use std::fs;
use std::path::{Path, PathBuf};

use proto_harness_core::gateway::SamplingParams;
use proto_harness_core::prompt::{
    VariantTag, DEFAULT_ANSWER_INSTRUCTION, DEFAULT_BINARY_INSTRUCTION, DEFAULT_GENERALIZATION_FRAGMENT,
    DEFAULT_N_PATHS, DEFAULT_TASK_FRAGMENT,
};
use proto_harness_core::decoding::DEFAULT_ANSWER_CAP;
use proto_harness_core::gateway::{DEFAULT_CREDENTIAL_ENV, DEFAULT_PARALLELISM};
use proto_harness_core::scorer::{
    ScoreConfig, DEFAULT_ANSWERS_K, DEFAULT_INCORRECT_K, DEFAULT_WORDNET_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

/// Name of the effective-config snapshot inside a run directory.
pub const SNAPSHOT_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Clustered,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub kind: DatasetKind,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            kind: DatasetKind::Clustered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exemplars: Option<PathBuf>,
    /// Directory of `<variant>.<stage>.txt` files replacing the built-ins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    pub task_fragment: String,
    pub answer_instruction: String,
    pub generalization_fragment: String,
    pub binary_instruction: String,
}

impl Default for PromptSection {
    fn default() -> Self {
        Self {
            exemplars: None,
            templates_dir: None,
            task_fragment: DEFAULT_TASK_FRAGMENT.into(),
            answer_instruction: DEFAULT_ANSWER_INSTRUCTION.into(),
            generalization_fragment: DEFAULT_GENERALIZATION_FRAGMENT.into(),
            binary_instruction: DEFAULT_BINARY_INSTRUCTION.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// JSONL fixture file for the mock backend.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
    pub endpoint: String,
    pub credential_env: String,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Http,
            fixtures: None,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            credential_env: DEFAULT_CREDENTIAL_ENV.into(),
            timeout_secs: 120,
            max_attempts: 5,
            base_delay_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodingSection {
    pub n_paths: u32,
    pub answer_cap: usize,
}

impl Default for DecodingSection {
    fn default() -> Self {
        Self {
            n_paths: DEFAULT_N_PATHS,
            answer_cap: DEFAULT_ANSWER_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherChoice {
    Exact,
    Wordnet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub matcher: MatcherChoice,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wordnet_dir: Option<PathBuf>,
    pub answers_k: Vec<u32>,
    pub incorrect_k: Vec<u32>,
}

impl Default for ScoringSection {
    fn default() -> Self {
        Self {
            matcher: MatcherChoice::Exact,
            threshold: DEFAULT_WORDNET_THRESHOLD,
            wordnet_dir: None,
            answers_k: DEFAULT_ANSWERS_K.to_vec(),
            incorrect_k: DEFAULT_INCORRECT_K.to_vec(),
        }
    }
}

impl ScoringSection {
    pub fn score_config(&self) -> ScoreConfig {
        ScoreConfig {
            answers_k: self.answers_k.clone(),
            incorrect_k: self.incorrect_k.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub repetitions: u32,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    pub parallelism: usize,
    /// Folded into every request key together with the repetition index.
    pub seed_label: String,
    /// Any failed question makes the run exit nonzero.
    pub fail_on_error: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            repetitions: 3,
            output_dir: PathBuf::from("runs/latest"),
            cache: None,
            parallelism: DEFAULT_PARALLELISM,
            seed_label: "run".into(),
            fail_on_error: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: VariantTag,
    pub dataset: DatasetConfig,
    pub prompt: PromptSection,
    pub backend: BackendSection,
    pub sampling: SamplingParams,
    pub decoding: DecodingSection,
    pub scoring: ScoringSection,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: VariantTag::Baseline,
            dataset: DatasetConfig::default(),
            prompt: PromptSection::default(),
            backend: BackendSection::default(),
            sampling: SamplingParams::default(),
            decoding: DecodingSection::default(),
            scoring: ScoringSection::default(),
            run: RunSection::default(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string.
fn parse_override_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_error(format!("bad override key {key:?}")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override {key:?}: {p:?} is not a section")))?;
    }
    node.insert(last.to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides in order, and resolves
    /// relative paths against the config file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut table, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| config_error(format!("cannot read config {}: {e}", p.display())))?;
                let table: Table = toml::from_str(&text)
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?;
                (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (Table::new(), PathBuf::new()),
        };
        // Absolute, so the snapshot stays valid wherever it is read from.
        let base = std::path::absolute(if base.as_os_str().is_empty() { Path::new(".") } else { &base })
            .map_err(|e| config_error(format!("cannot resolve config directory: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        config.resolve_paths(&base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = normalize(&base.join(&*p));
            }
        };
        fix(&mut self.dataset.path);
        fix(&mut self.run.output_dir);
        for p in [
            &mut self.prompt.exemplars,
            &mut self.prompt.templates_dir,
            &mut self.backend.fixtures,
            &mut self.scoring.wordnet_dir,
            &mut self.run.cache,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks that need no file access.
    pub fn check(&self) -> Result<(), CliError> {
        if self.dataset.path.as_os_str().is_empty() {
            return Err(config_error("dataset.path is required"));
        }
        if self.run.repetitions == 0 {
            return Err(config_error("run.repetitions must be at least 1"));
        }
        if self.run.parallelism == 0 {
            return Err(config_error("run.parallelism must be at least 1"));
        }
        if self.decoding.answer_cap == 0 {
            return Err(config_error("decoding.answer_cap must be at least 1"));
        }
        if self.decoding.n_paths == 0 {
            return Err(config_error("decoding.n_paths must be at least 1"));
        }
        if self.backend.max_attempts == 0 {
            return Err(config_error("backend.max_attempts must be at least 1"));
        }
        if self.backend.kind == BackendKind::Mock && self.backend.fixtures.is_none() {
            return Err(config_error("backend.fixtures is required for the mock backend"));
        }
        if self.scoring.matcher == MatcherChoice::Wordnet && self.scoring.wordnet_dir.is_none() {
            return Err(config_error("scoring.wordnet_dir is required for the wordnet matcher"));
        }
        self.sampling
            .validate()
            .map_err(|e| config_error(format!("sampling: {e}")))?;
        self.scoring
            .score_config()
            .validate()
            .map_err(|e| config_error(format!("scoring: {e}")))?;
        Ok(())
    }

    /// Effective configuration as sorted `dotted.key = value` lines.
    pub fn to_flat_toml(&self) -> String {
        let value = Value::try_from(self).expect("config serializes to TOML");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

/// Drops `.` and folds `..` lexically; no filesystem access.
fn normalize(path: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<String>) {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}
