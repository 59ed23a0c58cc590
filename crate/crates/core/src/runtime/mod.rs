//! Pipeline orchestration, run store, timing and audit.

pub mod audit;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod store;
pub mod timing;

pub use audit::{redaction_audit, AuditReport, Leak};
pub use config::{DecisionModeSetting, RunConfig, Templates};
pub use pipeline::{
    audit_prompts, auto_decide_run, evaluate_labels, run_pipeline, Pipeline, StageBackendSet,
};
pub use report::{failed_status, ItemFailure, RunCounts, RunReport, STATUS_OK, STATUS_RUNNING};
pub use store::{RunHandle, RunStore};
pub use timing::{compute_timing, StageTiming, TimingLedger};
