//! Resume ingestion: text normalization, sentence segmentation, token
//! estimation and the corpus length filter.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// Version tag of the segmentation rules (terminator split, bullet strip,
/// abbreviation guard). Recorded in run config snapshots.
pub const SEGMENTATION_RULES_VERSION: &str = "seg-v1";

pub const DEFAULT_TOKEN_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaHint {
    PlainText,
    PreExtracted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub source_name: String,
    pub media_hint: MediaHint,
    pub body: String,
    pub warnings: Vec<String>,
}

impl RawDocument {
    pub fn plain(doc_id: impl Into<String>, body: impl Into<String>) -> Self {
        let doc_id = doc_id.into();
        Self {
            source_name: doc_id.clone(),
            doc_id,
            media_hint: MediaHint::PlainText,
            body: body.into(),
            warnings: Vec::new(),
        }
    }
}

/// A normalized resume. Segment indices are the positions in `segments`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeRecord {
    #[serde(rename = "id")]
    pub resume_id: String,
    pub segments: Vec<String>,
    pub word_count: usize,
    pub token_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ResumeRecord {
    pub fn new(resume_id: impl Into<String>, segments: Vec<String>) -> Self {
        let word_count = count_words(&segments);
        Self {
            resume_id: resume_id.into(),
            segments,
            word_count,
            token_count: 0,
            warnings: Vec::new(),
        }
    }

    /// `(index, text)` pairs in order.
    pub fn indexed_segments(&self) -> impl Iterator<Item = (usize, &str)> {
        self.segments.iter().map(String::as_str).enumerate()
    }

    pub fn text(&self) -> String {
        self.segments.join("\n")
    }
}

fn count_words(segments: &[String]) -> usize {
    segments.iter().map(|s| s.split_whitespace().count()).sum()
}

/// Converts a raw document body into non-blank, trimmed line segments.
pub fn normalize_document(doc: &RawDocument) -> ResumeRecord {
    let cleaned: String = doc
        .body
        .chars()
        .filter_map(|c| match c {
            '\n' => Some('\n'),
            '\t' => Some(' '),
            c if c.is_control() => None,
            c => Some(c),
        })
        .collect();

    let segments: Vec<String> = cleaned
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(str::to_string)
        .collect();

    let mut record = ResumeRecord::new(doc.doc_id.clone(), segments);
    record.warnings = doc.warnings.clone();
    if doc.body.is_empty() {
        record.warnings.push("empty body".to_string());
    } else if record.segments.is_empty() {
        record
            .warnings
            .push("no content after normalization".to_string());
    }
    record
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Byte offsets at which `line` is cut into sentences.
fn split_points(line: &str) -> Vec<usize> {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut points = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_terminator(chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        // terminator run must be followed by whitespace and then more text
        if j < chars.len() && chars[j].1.is_whitespace() {
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            if k < chars.len() {
                let mut start = i;
                while start > 0 && !chars[start - 1].1.is_whitespace() {
                    start -= 1;
                }
                let token_len = chars[start..i]
                    .iter()
                    .rev()
                    .skip_while(|(_, c)| is_terminator(*c))
                    .count();
                let next_lower = chars[k].1.is_lowercase();
                let abbreviation = token_len <= 3 && next_lower;
                if !abbreviation {
                    points.push(chars[j].0);
                }
            }
        }
        i = j;
    }
    points
}

fn strip_bullets(mut text: &str) -> &str {
    loop {
        text = text.trim_start();
        if let Some(rest) = text.strip_prefix('•') {
            text = rest;
            continue;
        }
        let mut chars = text.chars();
        match (chars.next(), chars.next()) {
            (Some('-' | '*'), None) => text = "",
            (Some('-' | '*'), Some(c)) if c.is_whitespace() => text = &text[1..],
            _ => break,
        }
    }
    text.trim()
}

/// Splits segments on sentence terminators and strips leading bullet markers.
pub fn segment_sentences(record: &ResumeRecord) -> ResumeRecord {
    let mut segments = Vec::with_capacity(record.segments.len());
    for line in &record.segments {
        let mut last = 0;
        for cut in split_points(line)
            .into_iter()
            .chain(std::iter::once(line.len()))
        {
            let piece = strip_bullets(&line[last..cut]);
            if !piece.is_empty() {
                segments.push(piece.to_string());
            }
            last = cut;
        }
    }
    let mut out = ResumeRecord::new(record.resume_id.clone(), segments);
    out.token_count = record.token_count;
    out.warnings = record.warnings.clone();
    out
}

/// Pluggable token counter used by the corpus length filter.
#[derive(Clone, Default)]
pub enum TokenEstimator {
    /// `ceil(chars / 4)`.
    #[default]
    CharsDiv4,
    Whitespace,
    External(Arc<dyn Fn(&str) -> usize + Send + Sync>),
}

impl TokenEstimator {
    pub fn estimate(&self, text: &str) -> usize {
        match self {
            TokenEstimator::CharsDiv4 => text.chars().count().div_ceil(4),
            TokenEstimator::Whitespace => text.split_whitespace().count(),
            TokenEstimator::External(f) => f(text),
        }
    }
}

impl fmt::Debug for TokenEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenEstimator::CharsDiv4 => f.write_str("chars_div_4"),
            TokenEstimator::Whitespace => f.write_str("whitespace"),
            TokenEstimator::External(_) => f.write_str("external"),
        }
    }
}

impl FromStr for TokenEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chars_div_4" => Ok(TokenEstimator::CharsDiv4),
            "whitespace" => Ok(TokenEstimator::Whitespace),
            other => Err(Error::Config(format!(
                "unknown token estimator `{other}` (expected chars_div_4 or whitespace)"
            ))),
        }
    }
}

/// Counts tokens over the newline-joined segments and stores the result.
pub fn count_tokens(record: &mut ResumeRecord, estimator: &TokenEstimator) -> usize {
    let count = estimator.estimate(&record.text());
    record.token_count = count;
    count
}

/// Partitions records into `(kept, excluded)`; a record is excluded only when
/// its token count strictly exceeds `max_tokens`.
pub fn filter_corpus(
    records: Vec<ResumeRecord>,
    max_tokens: usize,
) -> (Vec<ResumeRecord>, Vec<ResumeRecord>) {
    records
        .into_iter()
        .partition(|r| r.token_count <= max_tokens)
}

/// Normalize, segment and count one document.
pub fn prepare_record(doc: &RawDocument, estimator: &TokenEstimator) -> ResumeRecord {
    let mut record = segment_sentences(&normalize_document(doc));
    count_tokens(&mut record, estimator);
    record
}

#[derive(Debug, Deserialize)]
struct TextLine {
    id: String,
    text: String,
}

/// Loads a corpus from a directory of `.txt` files (stem = id) or from a
/// line-delimited `{"id","text"}` file.
pub fn load_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    let docs = if path.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        entries.sort();
        entries
            .into_iter()
            .map(|p| {
                let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
                let body = String::from_utf8(bytes).map_err(|_| {
                    Error::InvalidInput(format!("{} is not valid UTF-8", p.display()))
                })?;
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(RawDocument {
                    doc_id: id,
                    source_name: p.display().to_string(),
                    media_hint: MediaHint::PlainText,
                    body,
                    warnings: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        jsonl::read::<TextLine>(path)?
            .into_iter()
            .map(|line| RawDocument {
                source_name: path.display().to_string(),
                doc_id: line.id,
                media_hint: MediaHint::PreExtracted,
                body: line.text,
                warnings: Vec::new(),
            })
            .collect()
    };

    let mut seen = HashSet::new();
    for doc in &docs {
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate document id `{}` in {}",
                doc.doc_id,
                path.display()
            )));
        }
    }
    Ok(docs)
}
