//! Slot-based prompt templates.
//!
//! Templates use `{{name}}` slots. A template file may carry a role preamble
//! (sent as the system message) separated from the task body by a line
//! containing only `---`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRADE_FORMAT: &str = "Grade: XX/100";
pub const SUMMARY_WORD_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConstraints {
    pub summary_word_limit: usize,
    pub grade_format: String,
}

impl Default for PromptConstraints {
    fn default() -> Self {
        Self {
            summary_word_limit: SUMMARY_WORD_LIMIT,
            grade_format: GRADE_FORMAT.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub role_preamble: String,
    pub task_body: String,
    #[serde(default)]
    pub constraints: PromptConstraints,
}

/// A rendered prompt: system text plus user text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

impl PromptTemplate {
    pub fn new(
        template_id: impl Into<String>,
        role_preamble: impl Into<String>,
        task_body: impl Into<String>,
    ) -> Self {
        Self {
            template_id: template_id.into(),
            role_preamble: role_preamble.into(),
            task_body: task_body.into(),
            constraints: PromptConstraints::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string());
        Ok(Self::parse(id, &text))
    }

    pub fn parse(template_id: impl Into<String>, text: &str) -> Self {
        let mut preamble = None;
        let mut body = Vec::new();
        for line in text.lines() {
            if line.trim() == "---" && preamble.is_none() {
                preamble = Some(body.join("\n"));
                body.clear();
            } else {
                body.push(line);
            }
        }
        Self::new(
            template_id,
            preamble.unwrap_or_default().trim().to_string(),
            body.join("\n").trim_matches('\n').to_string(),
        )
    }

    pub fn slots(&self) -> Vec<String> {
        let mut out = slot_names(&self.role_preamble);
        out.extend(slot_names(&self.task_body));
        out.sort();
        out.dedup();
        out
    }

    /// Fails with a configuration error if any of `required` is absent.
    pub fn require_slots(&self, required: &[&str]) -> Result<()> {
        let present = self.slots();
        let missing: Vec<&str> = required
            .iter()
            .copied()
            .filter(|slot| !present.iter().any(|p| p == slot))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "template `{}` is missing required slot(s): {}",
                self.template_id,
                missing.join(", ")
            )))
        }
    }

    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<RenderedPrompt> {
        Ok(RenderedPrompt {
            system: fill(&self.template_id, &self.role_preamble, values)?,
            user: fill(&self.template_id, &self.task_body, values)?,
        })
    }
}

fn slot_names(text: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                names.push(after[..close].trim().to_string());
                rest = &after[close + 2..];
            }
            None => break,
        }
    }
    names
}

fn fill(template_id: &str, text: &str, values: &BTreeMap<&str, String>) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else {
            return Err(Error::Config(format!(
                "template `{template_id}` has an unterminated slot"
            )));
        };
        let name = after[..close].trim();
        let value = values.get(name).ok_or_else(|| {
            Error::Config(format!(
                "template `{template_id}` uses unknown slot `{name}`"
            ))
        })?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
