use std::sync::LazyLock;
use std::time::Instant;

use async_trait::async_trait;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::{BackendError, ChatRequest, ChatResponse, LlmBackend, RequestTag};
use crate::assess::{RESUME_BEGIN, RESUME_END};
use crate::classify::heuristic_classify;

pub const MOCK_NAME: &str = "mock";
const MOCK_SUMMARY_WORDS: usize = 60;

static CARD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^ID:\s*(\S+)\s*\n\s*Grade:\s*(\d+)").expect("valid regex"));
static HIRES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Select exactly (\d+) candidate").expect("valid regex"));

/// First eight bytes of SHA-256, big-endian.
pub fn stable_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn resume_section(user_text: &str) -> &str {
    let Some(begin) = user_text.find(RESUME_BEGIN) else {
        return user_text.trim();
    };
    let after = &user_text[begin + RESUME_BEGIN.len()..];
    let end = after.find(RESUME_END).unwrap_or(after.len());
    after[..end].trim()
}

fn mock_classify(user_text: &str) -> String {
    let sentence = user_text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or_default();
    format!("Answer: {}", heuristic_classify(sentence))
}

fn mock_assess(user_text: &str) -> String {
    let resume = resume_section(user_text);
    let grade = 50 + 5 * (stable_hash(resume) % 10);
    let words: Vec<&str> = resume.split_whitespace().collect();
    let mut summary = words
        .iter()
        .take(MOCK_SUMMARY_WORDS)
        .copied()
        .collect::<Vec<_>>()
        .join(" ");
    if words.len() > MOCK_SUMMARY_WORDS {
        summary.push('…');
    }
    format!("Grade: {grade}/100\nSummary: {summary}")
}

fn mock_decide(user_text: &str) -> String {
    let hires = HIRES
        .captures(user_text)
        .and_then(|c| c[1].parse::<usize>().ok())
        .unwrap_or(1);
    let mut cards: Vec<(String, u32)> = CARD
        .captures_iter(user_text)
        .map(|c| (c[1].to_string(), c[2].parse().unwrap_or(0)))
        .collect();
    // stable: equal grades keep the listed (rank) order
    cards.sort_by_key(|c| std::cmp::Reverse(c.1));
    let chosen: Vec<&(String, u32)> = cards.iter().take(hires).collect();
    let mut out = String::new();
    for (id, _) in &chosen {
        out.push_str(&format!("ID: {id}\n"));
    }
    let grades: Vec<String> = chosen.iter().map(|(_, g)| format!("{g}/100")).collect();
    out.push_str(&format!(
        "Rationale: the selection holds the highest grades on the shortlist ({}), \
         and the summaries show the strongest fit for the stated requirements.",
        grades.join(", ")
    ));
    out
}

/// Deterministic answer for a request; a pure function of tag and user text.
pub fn mock_complete(req: &ChatRequest) -> ChatResponse {
    let started = Instant::now();
    let text = match req.request_tag {
        RequestTag::Classify => mock_classify(&req.user_text),
        RequestTag::Assess => mock_assess(&req.user_text),
        RequestTag::Decide => mock_decide(&req.user_text),
    };
    ChatResponse {
        text,
        latency_ms: started.elapsed().as_millis() as u64,
        token_usage: None,
        backend_name: MOCK_NAME.to_string(),
        attempts: 1,
        cached: false,
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend;

impl MockBackend {
    pub fn new() -> Self {
        Self
    }
}

#[async_trait]
impl LlmBackend for MockBackend {
    fn name(&self) -> &str {
        MOCK_NAME
    }

    fn max_in_flight(&self) -> usize {
        8
    }

    fn cacheable(&self) -> bool {
        false
    }

    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        req.validate()?;
        Ok(mock_complete(req))
    }
}
