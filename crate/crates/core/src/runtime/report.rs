use serde::{Deserialize, Serialize};

use super::audit::AuditReport;
use super::config::RunConfig;
use super::timing::TimingLedger;
use crate::assess::GradeErrorLedger;
use crate::classify::F1Report;
use crate::decide::{CandidateCard, DecisionRecord};
use crate::metrics::EvaluationReport;

pub const STATUS_OK: &str = "ok";
pub const STATUS_RUNNING: &str = "running";

pub fn failed_status(stage: &str) -> String {
    format!("failed:{stage}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RunCounts {
    pub ingested: usize,
    pub kept: usize,
    pub excluded: usize,
    pub sentences: usize,
    pub redacted_sentences: usize,
    pub fully_redacted: usize,
    pub classify_failures: usize,
    pub assessed: usize,
    pub assess_failures: usize,
    pub shortlisted: usize,
    pub corpus_words: u64,
}

/// A single resume dropped from a stage without aborting the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub stage: String,
    pub resume_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub status: String,
    pub failure: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub config: RunConfig,
    pub counts: RunCounts,
    pub grade_errors: GradeErrorLedger,
    pub shortlist: Vec<CandidateCard>,
    pub decisions: Vec<DecisionRecord>,
    pub evaluation: Option<EvaluationReport>,
    pub classification: Option<F1Report>,
    pub audit: AuditReport,
    pub timing: TimingLedger,
    pub item_failures: Vec<ItemFailure>,
    pub warnings: Vec<String>,
    /// Digest of stage outputs with latency, timestamps and run id removed.
    pub content_hash: String,
}

impl RunReport {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    pub fn failed_stage(&self) -> Option<&str> {
        self.status.strip_prefix("failed:")
    }
}
