//! Resume screening pipeline: ingestion, sentence classification with
//! redaction, LLM grading and summarization, ranked decisions, evaluation.

pub mod assess;
pub mod classify;
pub mod dataset;
pub mod decide;
pub mod error;
pub mod ingest;
pub mod jsonl;
pub mod llm;
pub mod metrics;
pub mod prompt;
pub mod runtime;

pub use assess::{AgentAssessment, GradeValue, MalformedReason, ParseStatus};
pub use classify::{ClassifiedSentence, RedactedResume, SentenceLabel};
pub use decide::{CandidateCard, DecisionCriteria, DecisionMode, DecisionRecord};
pub use error::{Error, Result};
pub use ingest::{RawDocument, ResumeRecord, TokenEstimator};
pub use llm::{BackendConfig, ChatRequest, ChatResponse, LlmBackend, MockBackend, SharedBackend};
pub use prompt::PromptTemplate;
pub use runtime::{RunConfig, RunReport, RunStore};
