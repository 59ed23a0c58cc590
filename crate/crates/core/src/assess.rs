//! The HR-agent stage: one prompt per redacted resume asking for a grade on
//! a 100-point scale and a summary of at most 100 words.

use std::collections::BTreeMap;
use std::sync::LazyLock;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::classify::RedactedResume;
use crate::error::{Error, Result};
use crate::llm::{ChatRequest, GenerationParams, LlmBackend, RequestTag};
use crate::prompt::{PromptTemplate, RenderedPrompt};

pub const RESUME_BEGIN: &str = "### Resume";
pub const RESUME_END: &str = "### End of resume";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedReason {
    NonNumeric,
    OutOfRange,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GradeValue {
    Valid(u8),
    Malformed {
        raw: String,
        reason: MalformedReason,
    },
}

impl GradeValue {
    /// Malformed grades count as zero.
    pub fn numeric(&self) -> u8 {
        match self {
            GradeValue::Valid(g) => *g,
            GradeValue::Malformed { .. } => 0,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, GradeValue::Valid(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    #[default]
    Ok,
    GradeMalformed,
    SummaryMissing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAssessment {
    pub grade: GradeValue,
    pub summary: String,
    pub status: ParseStatus,
    /// A fractional grade was floored to an integer.
    pub grade_fractional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "AssessmentRow", try_from = "AssessmentRow")]
pub struct AgentAssessment {
    pub resume_id: String,
    pub grade: GradeValue,
    pub summary: String,
    pub summary_word_count: usize,
    pub raw_output: String,
    pub parse_status: ParseStatus,
    pub latency_ms: u64,
    pub backend_name: String,
    pub grade_fractional: bool,
    pub summary_over_limit: bool,
}

/// Persisted form of an assessment. Only `id`, `grade` and `summary` are
/// required, so hand-written gold files load as well.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentRow {
    pub id: String,
    pub grade: u8,
    #[serde(default)]
    pub grade_status: ParseStatus,
    pub summary: String,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default)]
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade_error: Option<MalformedReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade_raw: Option<String>,
    #[serde(default)]
    pub raw_output: String,
    #[serde(default)]
    pub grade_fractional: bool,
    #[serde(default)]
    pub summary_over_limit: bool,
}

impl From<AgentAssessment> for AssessmentRow {
    fn from(a: AgentAssessment) -> Self {
        let (grade_error, grade_raw) = match &a.grade {
            GradeValue::Valid(_) => (None, None),
            GradeValue::Malformed { raw, reason } => (Some(*reason), Some(raw.clone())),
        };
        AssessmentRow {
            id: a.resume_id,
            grade: a.grade.numeric(),
            grade_status: a.parse_status,
            summary: a.summary,
            latency_ms: a.latency_ms,
            backend: a.backend_name,
            grade_error,
            grade_raw,
            raw_output: a.raw_output,
            grade_fractional: a.grade_fractional,
            summary_over_limit: a.summary_over_limit,
        }
    }
}

impl TryFrom<AssessmentRow> for AgentAssessment {
    type Error = String;

    fn try_from(row: AssessmentRow) -> std::result::Result<Self, String> {
        let grade = match row.grade_error {
            Some(reason) => GradeValue::Malformed {
                raw: row.grade_raw.unwrap_or_default(),
                reason,
            },
            None if row.grade <= 100 => GradeValue::Valid(row.grade),
            None => return Err(format!("grade {} for `{}` exceeds 100", row.grade, row.id)),
        };
        Ok(AgentAssessment {
            summary_word_count: word_count(&row.summary),
            resume_id: row.id,
            grade,
            summary: row.summary,
            raw_output: row.raw_output,
            parse_status: row.grade_status,
            latency_ms: row.latency_ms,
            backend_name: row.backend,
            grade_fractional: row.grade_fractional,
            summary_over_limit: row.summary_over_limit,
        })
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn default_assessment_template() -> PromptTemplate {
    PromptTemplate::new(
        "assess-v1",
        "You are an HR professional in an IT firm with over a decade of HR experience. \
         You review resumes for technical positions and judge each candidate with the \
         insight of a seasoned HR expert.",
        format!(
            "Below is a candidate's resume with personal information removed.\n\n\
             {RESUME_BEGIN}\n{{{{resume}}}}\n{RESUME_END}\n\n\
             First, grade the resume on a 100-point scale. Strive for precision and variety \
             in your assessment, and report the grade in the format \"{{{{grade_format}}}}\".\n\
             Then summarize the resume in one concise paragraph, limited to {{{{word_limit}}}} \
             words, starting with \"Summary:\"."
        ),
    )
}

/// Renders the role-play grading and summarization prompt for one resume.
pub fn build_assessment_prompt(
    resume: &RedactedResume,
    template: &PromptTemplate,
) -> Result<RenderedPrompt> {
    if resume.is_fully_redacted() {
        return Err(Error::stage(
            "assess",
            format!("no content to assess for `{}`", resume.resume_id),
        ));
    }
    template.require_slots(&["resume"])?;
    let body = resume
        .retained
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    let mut values = BTreeMap::new();
    values.insert("resume", body);
    values.insert("grade_format", template.constraints.grade_format.clone());
    values.insert(
        "word_limit",
        template.constraints.summary_word_limit.to_string(),
    );
    template.render(&values)
}

static GRADE_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bgrade\b\s*\**\s*[:：]").expect("valid regex"));
static GRADE_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(-?\d+(?:\.\d+)?)(?:\s*/\s*(\d+))?").expect("valid regex"));
static SUMMARY_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bsummary\b\s*\**\s*[:：]").expect("valid regex"));

fn excerpt(s: &str) -> String {
    s.chars().take(40).collect::<String>().trim().to_string()
}

/// Returns the grade and the byte offset where the grade line ends.
fn parse_grade(raw: &str) -> (GradeValue, bool, Option<usize>) {
    let Some(label) = GRADE_LABEL.find(raw) else {
        return (
            GradeValue::Malformed {
                raw: String::new(),
                reason: MalformedReason::Missing,
            },
            false,
            None,
        );
    };
    let rest = &raw[label.end()..];
    let mut line_end = label.end() + rest.find('\n').unwrap_or(rest.len());
    let mut content = raw[label.end()..line_end].trim();
    if content.trim_matches('*').trim().is_empty() {
        // value on the following line
        let after = &raw[line_end..];
        if let Some((offset, line)) = after
            .split_inclusive('\n')
            .scan(0, |pos, l| {
                let start = *pos;
                *pos += l.len();
                Some((start, l))
            })
            .find(|(_, l)| !l.trim().is_empty())
        {
            content = line.trim();
            line_end += offset + line.trim_end_matches('\n').len();
        }
    }
    let content = content.trim_start_matches(['*', ' ']).trim();
    if content.is_empty() {
        return (
            GradeValue::Malformed {
                raw: String::new(),
                reason: MalformedReason::Missing,
            },
            false,
            Some(line_end),
        );
    }
    let Some(caps) = GRADE_NUMBER.captures(content) else {
        return (
            GradeValue::Malformed {
                raw: excerpt(content),
                reason: MalformedReason::NonNumeric,
            },
            false,
            Some(line_end),
        );
    };
    if caps.get(2).is_some_and(|d| d.as_str() != "100") {
        return (
            GradeValue::Malformed {
                raw: excerpt(content),
                reason: MalformedReason::NonNumeric,
            },
            false,
            Some(line_end),
        );
    }
    let number: f64 = caps[1].parse().unwrap_or(f64::NAN);
    if !(0.0..=100.0).contains(&number) {
        return (
            GradeValue::Malformed {
                raw: excerpt(content),
                reason: MalformedReason::OutOfRange,
            },
            false,
            Some(line_end),
        );
    }
    let fractional = number.fract() != 0.0;
    (
        GradeValue::Valid(number.floor() as u8),
        fractional,
        Some(line_end),
    )
}

fn first_paragraph(text: &str) -> String {
    let mut lines = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if lines.is_empty() {
                continue;
            }
            break;
        }
        lines.push(line.trim());
    }
    lines.join(" ")
}

/// Extracts grade and summary from free model output. Total: every failure
/// is reported through the returned status.
pub fn parse_assessment(raw: &str) -> ParsedAssessment {
    let (grade, grade_fractional, grade_line_end) = parse_grade(raw);
    let summary = match SUMMARY_LABEL.find(raw) {
        Some(m) => raw[m.end()..]
            .trim()
            .trim_start_matches('*')
            .trim()
            .to_string(),
        None => first_paragraph(&raw[grade_line_end.unwrap_or(0)..]),
    };
    let status = if !grade.is_valid() {
        ParseStatus::GradeMalformed
    } else if summary.is_empty() {
        ParseStatus::SummaryMissing
    } else {
        ParseStatus::Ok
    };
    ParsedAssessment {
        grade,
        summary,
        status,
        grade_fractional,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssessOptions {
    pub generation: GenerationParams,
    pub summary_word_limit: usize,
    pub truncate_mode: bool,
}

impl Default for AssessOptions {
    fn default() -> Self {
        Self {
            generation: GenerationParams::default(),
            summary_word_limit: crate::prompt::SUMMARY_WORD_LIMIT,
            truncate_mode: false,
        }
    }
}

/// One backend call per resume. Transport failures are retried inside the
/// backend; a malformed grade is recorded as-is.
pub async fn assess_resume(
    resume: &RedactedResume,
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    options: &AssessOptions,
) -> Result<AgentAssessment> {
    let prompt = build_assessment_prompt(resume, template)?;
    let request = ChatRequest::new(RequestTag::Assess, prompt.system, prompt.user)
        .with_generation(&options.generation);
    let started = Instant::now();
    let response = backend
        .complete(&request)
        .await
        .map_err(|e| Error::stage("assess", format!("resume `{}`: {e}", resume.resume_id)))?;
    let latency_ms = started.elapsed().as_millis() as u64;

    let parsed = parse_assessment(&response.text);
    let assessment = AgentAssessment {
        resume_id: resume.resume_id.clone(),
        summary_word_count: word_count(&parsed.summary),
        grade: parsed.grade,
        summary: parsed.summary,
        raw_output: response.text,
        parse_status: parsed.status,
        latency_ms,
        backend_name: response.backend_name,
        grade_fractional: parsed.grade_fractional,
        summary_over_limit: false,
    };
    Ok(check_summary_limit(
        assessment,
        options.summary_word_limit,
        options.truncate_mode,
    ))
}

fn truncate_at_sentence(text: &str, limit: usize) -> String {
    let head = text
        .split_whitespace()
        .take(limit)
        .collect::<Vec<_>>()
        .join(" ");
    let boundary = head
        .char_indices()
        .filter(|(i, c)| {
            matches!(c, '.' | '!' | '?')
                && head[i + c.len_utf8()..]
                    .chars()
                    .next()
                    .is_none_or(char::is_whitespace)
        })
        .map(|(i, c)| i + c.len_utf8())
        .next_back();
    match boundary {
        Some(end) => head[..end].to_string(),
        None => head,
    }
}

/// Flags summaries longer than `limit` words; with `truncate` the summary is
/// cut back to the last sentence boundary within the limit.
pub fn check_summary_limit(
    mut assessment: AgentAssessment,
    limit: usize,
    truncate: bool,
) -> AgentAssessment {
    let words = word_count(&assessment.summary);
    assessment.summary_over_limit = words > limit;
    if assessment.summary_over_limit && truncate {
        assessment.summary = truncate_at_sentence(&assessment.summary, limit);
    }
    assessment.summary_word_count = word_count(&assessment.summary);
    assessment
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeErrorLedger {
    pub total_errors: usize,
    pub by_reason: BTreeMap<MalformedReason, usize>,
}

pub fn grade_error_ledger(assessments: &[AgentAssessment]) -> GradeErrorLedger {
    let mut by_reason: BTreeMap<MalformedReason, usize> = [
        MalformedReason::NonNumeric,
        MalformedReason::OutOfRange,
        MalformedReason::Missing,
    ]
    .into_iter()
    .map(|r| (r, 0))
    .collect();
    for a in assessments {
        if let GradeValue::Malformed { reason, .. } = &a.grade {
            *by_reason.entry(*reason).or_default() += 1;
        }
    }
    GradeErrorLedger {
        total_errors: by_reason.values().sum(),
        by_reason,
    }
}
