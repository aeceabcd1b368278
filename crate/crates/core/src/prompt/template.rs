//! Plain-text prompt templates with `{name}` placeholders, one per
//! (variant, stage) pair.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{PromptError, StageKind, VariantTag};

/// Templates shipped with the crate; a directory passed to
/// [`TemplateSet::with_overrides`] may replace any of them.
const DEFAULTS: [(&str, &str); 8] = [
    ("baseline.answer", include_str!("../../templates/baseline.answer.txt")),
    ("task_relevant.answer", include_str!("../../templates/task_relevant.answer.txt")),
    ("evidence_thinking.elicit", include_str!("../../templates/evidence_thinking.elicit.txt")),
    ("evidence_thinking.answer", include_str!("../../templates/evidence_thinking.answer.txt")),
    ("evidence_knowledge.elicit", include_str!("../../templates/evidence_knowledge.elicit.txt")),
    ("evidence_knowledge.answer", include_str!("../../templates/evidence_knowledge.answer.txt")),
    ("diverse_path.path_sample", include_str!("../../templates/diverse_path.path_sample.txt")),
    ("diverse_path.summarize", include_str!("../../templates/diverse_path.summarize.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.trim_end().to_string()))
                .collect(),
        }
    }
}

pub fn template_key(variant: VariantTag, stage: StageKind) -> String {
    format!("{}.{}", variant.as_str(), stage.file_stem())
}

impl TemplateSet {
    /// Default templates with any `<variant>.<stage>.txt` file found in `dir`
    /// taking precedence.
    pub fn with_overrides(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut set = Self::default();
        let entries = fs::read_dir(dir)
            .map_err(|e| PromptError::Template(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry
                .map_err(|e| PromptError::Template(e.to_string()))?
                .path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(key) = name.strip_suffix(".txt") else {
                continue;
            };
            if !set.templates.contains_key(key) {
                return Err(PromptError::Template(format!(
                    "unknown template file {name}"
                )));
            }
            let text = fs::read_to_string(&path)
                .map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
            set.templates.insert(key.to_string(), text.trim_end().to_string());
        }
        Ok(set)
    }

    pub fn insert(&mut self, variant: VariantTag, stage: StageKind, text: impl Into<String>) {
        self.templates.insert(template_key(variant, stage), text.into());
    }

    pub fn get(&self, variant: VariantTag, stage: StageKind) -> Result<&str, PromptError> {
        let key = template_key(variant, stage);
        self.templates
            .get(&key)
            .map(String::as_str)
            .ok_or(PromptError::Template(format!("no template for {key}")))
    }
}

/// Placeholder names in order of first appearance.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut names = Vec::new();
    for (_, name) in scan(template) {
        if !names.contains(&name) {
            names.push(name);
        }
    }
    names
}

/// Yields `(byte offset of '{', name)` for every `{ident}` where ident is
/// lowercase ascii letters and underscores. Other braces are literal text.
fn scan(template: &str) -> impl Iterator<Item = (usize, &str)> {
    let bytes = template.as_bytes();
    let mut i = 0;
    std::iter::from_fn(move || {
        while i < bytes.len() {
            if bytes[i] == b'{' {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                    j += 1;
                }
                if j > start && j < bytes.len() && bytes[j] == b'}' {
                    let at = i;
                    i = j + 1;
                    return Some((at, &template[start..j]));
                }
            }
            i += 1;
        }
        None
    })
}

pub fn render(template: &str, vars: &BTreeMap<&str, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for (at, name) in scan(template) {
        let value = vars
            .get(name)
            .ok_or_else(|| PromptError::MissingPlaceholder(name.to_string()))?;
        out.push_str(&template[last..at]);
        out.push_str(value);
        last = at + name.len() + 2;
    }
    out.push_str(&template[last..]);
    Ok(out)
}
