//! Ranking, shortlisting and the final selection (CEO agent or a human).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::assess::{AgentAssessment, GradeValue};
use crate::error::{Error, Result};
use crate::llm::{ChatRequest, GenerationParams, LlmBackend, RequestTag};
use crate::prompt::PromptTemplate;

pub const DEFAULT_TOP_K: usize = 10;
const STRICT_REMINDER: &str =
    "Reminder: answer with exactly the required number of candidate IDs, \
    one per line in the form \"ID: <id>\", taken only from the candidates listed above, \
    followed by your rationale.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCard {
    #[serde(rename = "id")]
    pub resume_id: String,
    #[serde(rename = "grade")]
    pub grade_numeric: u8,
    pub summary: String,
    /// False when the grade came from a malformed output.
    #[serde(default = "default_true")]
    pub grade_valid: bool,
}

fn default_true() -> bool {
    true
}

impl CandidateCard {
    pub fn from_assessment(a: &AgentAssessment) -> Self {
        Self {
            resume_id: a.resume_id.clone(),
            grade_numeric: a.grade.numeric(),
            summary: a.summary.clone(),
            grade_valid: matches!(a.grade, GradeValue::Valid(_)),
        }
    }
}

fn card_order(a: &CandidateCard, b: &CandidateCard) -> Ordering {
    b.grade_valid
        .cmp(&a.grade_valid)
        .then(b.grade_numeric.cmp(&a.grade_numeric))
        .then_with(|| a.resume_id.cmp(&b.resume_id))
}

/// Descending by grade, ties by ascending id, malformed grades last.
pub fn rank_candidates(assessments: &[AgentAssessment]) -> Vec<CandidateCard> {
    let mut cards: Vec<CandidateCard> = assessments
        .iter()
        .map(CandidateCard::from_assessment)
        .collect();
    cards.sort_by(card_order);
    cards
}

pub fn take_top_k(ranked: &[CandidateCard], k: usize) -> Result<Vec<CandidateCard>> {
    if k == 0 {
        return Err(Error::InvalidInput(
            "shortlist size k must be at least 1".into(),
        ));
    }
    Ok(ranked.iter().take(k).cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionCriteria {
    pub hires: usize,
    pub role_description: String,
    pub extra_instructions: String,
}

impl Default for DecisionCriteria {
    fn default() -> Self {
        Self {
            hires: 1,
            role_description: String::new(),
            extra_instructions: String::new(),
        }
    }
}

impl DecisionCriteria {
    pub fn hires(hires: usize) -> Self {
        Self {
            hires,
            ..Self::default()
        }
    }

    pub fn with_role(mut self, role: impl Into<String>) -> Self {
        self.role_description = role.into();
        self
    }

    pub fn validate(&self, shortlist_len: usize) -> Result<()> {
        if self.hires == 0 {
            return Err(Error::validation(
                "hires must be positive",
                "hires",
                "must be at least 1",
            ));
        }
        if self.hires > shortlist_len {
            return Err(Error::validation(
                format!(
                    "cannot hire {} from a shortlist of {shortlist_len}",
                    self.hires
                ),
                "hires",
                format!("exceeds shortlist size {shortlist_len}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub run_id: String,
    pub selected_ids: Vec<String>,
    pub rationale: String,
    pub mode: DecisionMode,
    pub decider: String,
    pub criteria: DecisionCriteria,
    pub timestamp: String,
}

impl DecisionRecord {
    /// Checks containment and count before anything is stored.
    pub fn new(
        run_id: impl Into<String>,
        shortlist: &[CandidateCard],
        criteria: DecisionCriteria,
        selected_ids: Vec<String>,
        rationale: impl Into<String>,
        mode: DecisionMode,
        decider: impl Into<String>,
    ) -> Result<Self> {
        criteria.validate(shortlist.len())?;
        let mut fields = BTreeMap::new();
        let known: HashSet<&str> = shortlist.iter().map(|c| c.resume_id.as_str()).collect();
        let outside: Vec<&str> = selected_ids
            .iter()
            .map(String::as_str)
            .filter(|id| !known.contains(id))
            .collect();
        if !outside.is_empty() {
            fields.insert(
                "selected_ids".to_string(),
                format!("not in shortlist: {}", outside.join(", ")),
            );
        }
        let distinct: HashSet<&String> = selected_ids.iter().collect();
        if distinct.len() != selected_ids.len() {
            fields.insert("selected_ids".to_string(), "duplicate ids".to_string());
        }
        if selected_ids.len() != criteria.hires {
            fields.insert(
                "selected_ids".to_string(),
                format!(
                    "expected {} ids, got {}",
                    criteria.hires,
                    selected_ids.len()
                ),
            );
        }
        if !fields.is_empty() {
            return Err(Error::Validation {
                message: "invalid decision".into(),
                fields,
            });
        }
        Ok(Self {
            run_id: run_id.into(),
            selected_ids,
            rationale: rationale.into(),
            mode,
            decider: decider.into(),
            criteria,
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        })
    }
}

pub fn default_decision_template() -> PromptTemplate {
    PromptTemplate::new(
        "decide-v1",
        "You are the CEO of an IT company. Your HR team has graded and summarized the \
         applicants, and you make the final hiring decision.",
        "{{criteria}}\nBelow are the shortlisted candidates, ranked by grade.\n\n{{cards}}\n\n\
         Select exactly {{hires}} {{candidate_noun}} out of the {{count}} candidates above. \
         Output the ID of each chosen candidate on its own line as \"ID: <id>\", then \
         articulate the rationale behind this particular selection.",
    )
}

fn count_phrase(n: usize) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    let number = WORDS
        .get(n)
        .map(|w| w.to_string())
        .unwrap_or_else(|| n.to_string());
    let noun = if n == 1 { "individual" } else { "individuals" };
    format!("{number} {noun}")
}

pub fn render_card(card: &CandidateCard) -> String {
    format!(
        "ID: {}\nGrade: {}/100\nSummary: {}",
        card.resume_id, card.grade_numeric, card.summary
    )
}

pub fn build_decision_prompt(
    shortlist: &[CandidateCard],
    criteria: &DecisionCriteria,
    template: &PromptTemplate,
) -> Result<(String, String)> {
    if shortlist.is_empty() {
        return Err(Error::InvalidInput("shortlist is empty".into()));
    }
    criteria.validate(shortlist.len())?;
    template.require_slots(&["cards", "hires"])?;

    let role = if criteria.role_description.trim().is_empty() {
        "open".to_string()
    } else {
        criteria.role_description.trim().to_string()
    };
    let mut criteria_text = format!(
        "You are now recruiting {} for {role} roles in your company.",
        count_phrase(criteria.hires)
    );
    if !criteria.extra_instructions.trim().is_empty() {
        criteria_text.push(' ');
        criteria_text.push_str(criteria.extra_instructions.trim());
    }

    let cards = shortlist
        .iter()
        .map(render_card)
        .collect::<Vec<_>>()
        .join("\n\n");
    let mut values = BTreeMap::new();
    values.insert("criteria", criteria_text);
    values.insert("cards", cards);
    values.insert("hires", criteria.hires.to_string());
    values.insert(
        "candidate_noun",
        if criteria.hires == 1 {
            "candidate"
        } else {
            "candidates"
        }
        .to_string(),
    );
    values.insert("count", shortlist.len().to_string());
    let rendered = template.render(&values)?;
    Ok((rendered.system, rendered.user))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionParseFailure {
    pub raw: String,
    pub found: Vec<String>,
}

fn is_id_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn id_positions(raw: &str, id: &str) -> Option<usize> {
    raw.match_indices(id)
        .find(|(pos, _)| {
            let before = raw[..*pos].chars().next_back();
            let after = raw[pos + id.len()..].chars().next();
            before.is_none_or(|c| !is_id_char(c)) && after.is_none_or(|c| !is_id_char(c))
        })
        .map(|(pos, _)| pos)
}

/// Finds shortlist ids in order of first appearance and keeps the first
/// `hires`. The rationale is the full answer.
pub fn parse_decision(
    raw: &str,
    shortlist: &[CandidateCard],
    hires: usize,
) -> std::result::Result<(Vec<String>, String), DecisionParseFailure> {
    let mut hits: Vec<(usize, &str)> = shortlist
        .iter()
        .filter_map(|c| id_positions(raw, &c.resume_id).map(|p| (p, c.resume_id.as_str())))
        .collect();
    // a longer id starting at the same offset wins
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.len().cmp(&a.1.len())));
    hits.dedup_by_key(|h| h.0);
    let found: Vec<String> = hits.iter().map(|(_, id)| id.to_string()).collect();
    if found.len() < hires || hires == 0 {
        return Err(DecisionParseFailure {
            raw: raw.to_string(),
            found,
        });
    }
    Ok((found.into_iter().take(hires).collect(), raw.to_string()))
}

/// Prompt, answer and outcome of one decision call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionAttempt {
    pub system: String,
    pub user: String,
    pub response: String,
}

/// Runs the CEO agent. One stricter retry on an unparseable answer.
pub async fn decide_auto(
    run_id: &str,
    shortlist: &[CandidateCard],
    criteria: &DecisionCriteria,
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    params: &GenerationParams,
) -> Result<(DecisionRecord, Vec<DecisionAttempt>)> {
    let (system, user) = build_decision_prompt(shortlist, criteria, template)?;
    let mut attempts = Vec::new();
    for strict in [false, true] {
        let user_text = if strict {
            format!("{user}\n\n{STRICT_REMINDER}")
        } else {
            user.clone()
        };
        let request = ChatRequest::new(RequestTag::Decide, system.clone(), user_text.clone())
            .with_generation(params);
        let response = backend
            .complete(&request)
            .await
            .map_err(|e| Error::stage("decide", e.to_string()))?;
        attempts.push(DecisionAttempt {
            system: system.clone(),
            user: user_text,
            response: response.text.clone(),
        });
        match parse_decision(&response.text, shortlist, criteria.hires) {
            Ok((ids, rationale)) => {
                let record = DecisionRecord::new(
                    run_id,
                    shortlist,
                    criteria.clone(),
                    ids,
                    rationale,
                    DecisionMode::Auto,
                    response.backend_name,
                )?;
                return Ok((record, attempts));
            }
            Err(failure) => warn!(
                found = failure.found.len(),
                needed = criteria.hires,
                strict,
                "decision answer did not name enough candidates"
            ),
        }
    }
    let transcript = attempts
        .iter()
        .map(|a| a.response.as_str())
        .collect::<Vec<_>>()
        .join("\n---\n");
    Err(Error::stage(
        "decide",
        format!(
            "could not parse a selection of {} candidate(s); transcript:\n{transcript}",
            criteria.hires
        ),
    ))
}

pub fn record_manual_decision(
    run_id: &str,
    shortlist: &[CandidateCard],
    criteria: &DecisionCriteria,
    selected_ids: Vec<String>,
    rationale: impl Into<String>,
    user: impl Into<String>,
) -> Result<DecisionRecord> {
    DecisionRecord::new(
        run_id,
        shortlist,
        criteria.clone(),
        selected_ids,
        rationale,
        DecisionMode::Manual,
        user,
    )
}
