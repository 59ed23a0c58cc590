use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use futures::stream::{self, StreamExt};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use super::audit::{redaction_audit, AuditReport};
use super::config::{DecisionModeSetting, RunConfig, Templates};
use super::report::{failed_status, ItemFailure, RunCounts, RunReport, STATUS_OK};
use super::store::{self, RunHandle, RunStore};
use super::timing::{compute_timing, StageTiming};
use crate::assess::{assess_resume, grade_error_ledger, AgentAssessment, AssessmentRow};
use crate::classify::{
    classify_resume, eval_classification, redact, ClassifiedSentence, GoldLabel, RedactedResume,
};
use crate::decide::{
    decide_auto, rank_candidates, take_top_k, CandidateCard, DecisionCriteria, DecisionRecord,
};
use crate::error::{Error, Result};
use crate::ingest::{filter_corpus, load_corpus, prepare_record, ResumeRecord};
use crate::jsonl;
use crate::llm::{
    build_backend, LlmBackend, PromptRecord, RecordingBackend, RequestTag, SharedBackend,
    Transcript,
};
use crate::metrics::evaluate_assessments;

#[derive(Clone)]
pub struct StageBackendSet {
    pub classify: SharedBackend,
    pub assess: SharedBackend,
    pub decide: SharedBackend,
}

impl StageBackendSet {
    pub fn uniform(backend: SharedBackend) -> Self {
        Self {
            classify: backend.clone(),
            assess: backend.clone(),
            decide: backend,
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            classify: build_backend(cfg.stage_backend("classify"))?,
            assess: build_backend(cfg.stage_backend("assess"))?,
            decide: build_backend(cfg.stage_backend("decide"))?,
        })
    }
}

/// A validated configuration bound to its backends and templates.
pub struct Pipeline {
    cfg: RunConfig,
    backends: StageBackendSet,
    templates: Templates,
}

#[derive(Default)]
struct RunState {
    counts: RunCounts,
    kept: Vec<ResumeRecord>,
    excluded: Vec<ResumeRecord>,
    classified: Vec<ClassifiedSentence>,
    redacted: Vec<RedactedResume>,
    assessments: Vec<AgentAssessment>,
    shortlist: Vec<CandidateCard>,
    decisions: Vec<DecisionRecord>,
    evaluation: Option<crate::metrics::EvaluationReport>,
    classification: Option<crate::classify::F1Report>,
    stages: Vec<StageTiming>,
    item_failures: Vec<ItemFailure>,
    warnings: Vec<String>,
}

/// Stage outputs that feed the content hash.
#[derive(Serialize)]
struct HashProjection<'a> {
    status: &'a str,
    records: &'a [ResumeRecord],
    excluded: &'a [ResumeRecord],
    classified: &'a [ClassifiedSentence],
    redacted: &'a [RedactedResume],
    assessments: Vec<AssessmentRow>,
    shortlist: &'a [CandidateCard],
    decisions: Vec<(&'a [String], &'a str, &'a DecisionCriteria, &'a str)>,
    evaluation: &'a Option<crate::metrics::EvaluationReport>,
    classification: &'a Option<crate::classify::F1Report>,
    item_failures: &'a [ItemFailure],
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

fn llm_ms(transcript: &Transcript, tag: RequestTag) -> u64 {
    transcript
        .entries()
        .iter()
        .filter(|e| e.tag == tag)
        .map(|e| e.latency_ms)
        .sum()
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

type StageResult = std::result::Result<(), (&'static str, Error)>;

trait StageContext<T> {
    fn stage(self, name: &'static str) -> std::result::Result<T, (&'static str, Error)>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, name: &'static str) -> std::result::Result<T, (&'static str, Error)> {
        self.map_err(|e| (name, e))
    }
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let backends = StageBackendSet::from_config(&cfg)?;
        Self::with_backends(cfg, backends)
    }

    /// Uses the given backends instead of building them from config.
    pub fn with_backends(cfg: RunConfig, backends: StageBackendSet) -> Result<Self> {
        cfg.validate()?;
        let templates = cfg.templates()?;
        Ok(Self {
            cfg,
            backends,
            templates,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn backends(&self) -> &StageBackendSet {
        &self.backends
    }

    /// Creates the run directory and executes all stages into it.
    pub async fn run(&self, store: &RunStore) -> Result<RunReport> {
        let handle = store.create_run(&self.cfg)?;
        self.execute(handle).await
    }

    /// Executes all stages into an already reserved run directory. A stage
    /// abort still persists the partial run with a `failed:<stage>` status.
    pub async fn execute(&self, mut handle: RunHandle) -> Result<RunReport> {
        let started_at = now();
        let t_total = Instant::now();
        let transcript = Transcript::new();
        let mut state = RunState::default();
        info!(run_id = %handle.run_id, "run started");

        let outcome = self.stages(&mut handle, &mut state, &transcript).await;
        let (status, failure) = match outcome {
            Ok(()) => (STATUS_OK.to_string(), None),
            Err((stage, e)) => {
                warn!(run_id = %handle.run_id, stage, error = %e, "run aborted");
                (failed_status(stage), Some(e.to_string()))
            }
        };

        let prompts: Vec<PromptRecord> = transcript
            .prompts()
            .into_iter()
            .filter(|p| p.tag != RequestTag::Classify)
            .collect();
        handle.write_jsonl(store::TRANSCRIPT, &transcript.entries())?;
        handle.write_jsonl(store::PROMPTS, &prompts)?;
        let audit = audit_prompts(&state.classified, &prompts);
        if !audit.is_clean() {
            warn!(
                leaks = audit.leaks.len(),
                "redaction audit found personal information in prompts"
            );
        }

        let content_hash = content_hash(&status, &state);
        let timing = compute_timing(
            std::mem::take(&mut state.stages),
            state.counts.corpus_words,
            self.cfg.human_decision_minutes,
            Some(elapsed_ms(t_total)),
        );
        let report = RunReport {
            run_id: handle.run_id.clone(),
            status,
            failure,
            started_at,
            finished_at: now(),
            config: self.cfg.clone(),
            counts: state.counts,
            grade_errors: grade_error_ledger(&state.assessments),
            shortlist: state.shortlist,
            decisions: state.decisions,
            evaluation: state.evaluation,
            classification: state.classification,
            audit,
            timing,
            item_failures: state.item_failures,
            warnings: state.warnings,
            content_hash,
        };
        handle.write_json(store::REPORT, &report)?;
        handle.finalize()?;
        info!(run_id = %report.run_id, status = %report.status, "run finished");
        Ok(report)
    }

    async fn stages(
        &self,
        handle: &mut RunHandle,
        state: &mut RunState,
        transcript: &Transcript,
    ) -> StageResult {
        let cfg = &self.cfg;

        // ingest
        let t = Instant::now();
        let estimator = cfg.token_estimator().stage("ingest")?;
        let docs = load_corpus(&cfg.corpus).stage("ingest")?;
        let records: Vec<ResumeRecord> =
            docs.iter().map(|d| prepare_record(d, &estimator)).collect();
        state.counts.ingested = records.len();
        let (kept, excluded) = filter_corpus(records, cfg.token_limit);
        state.counts.kept = kept.len();
        state.counts.excluded = excluded.len();
        state.counts.sentences = kept.iter().map(|r| r.segments.len()).sum();
        state.counts.corpus_words = kept.iter().map(|r| r.word_count as u64).sum();
        for r in &excluded {
            state.warnings.push(format!(
                "resume `{}` excluded: {} tokens over limit {}",
                r.resume_id, r.token_count, cfg.token_limit
            ));
        }
        handle.write_jsonl(store::RECORDS, &kept).stage("ingest")?;
        handle
            .write_jsonl(store::EXCLUDED, &excluded)
            .stage("ingest")?;
        state.stages.push(StageTiming::new(
            "ingest",
            elapsed_ms(t),
            state.counts.ingested,
            0,
        ));
        state.kept = kept;
        state.excluded = excluded;

        // classify and redact
        let t = Instant::now();
        let classify_backend =
            RecordingBackend::new(self.backends.classify.clone(), transcript.clone());
        let limit = classify_backend.max_in_flight().max(1);
        let results: Vec<(String, Result<Vec<ClassifiedSentence>>)> =
            stream::iter(0..state.kept.len())
                .map(|i| {
                    let record = &state.kept[i];
                    let backend = &classify_backend;
                    async move {
                        let out = if record.segments.is_empty() {
                            Ok(Vec::new())
                        } else {
                            classify_resume(
                                record,
                                backend,
                                &self.templates.classify,
                                &cfg.classify.generation,
                                cfg.classify.retry,
                            )
                            .await
                        };
                        (record.resume_id.clone(), out)
                    }
                })
                .buffered(limit)
                .collect()
                .await;
        let attempted = results.len();
        for (resume_id, result) in results {
            match result {
                Ok(sentences) if sentences.is_empty() => {
                    state.counts.fully_redacted += 1;
                    state.warnings.push(format!(
                        "resume `{resume_id}` has no sentences; not assessed"
                    ));
                }
                Ok(sentences) => {
                    let redacted = redact(&sentences).stage("classify")?;
                    state.counts.redacted_sentences += redacted.redacted_count;
                    if redacted.is_fully_redacted() {
                        state.counts.fully_redacted += 1;
                        state
                            .warnings
                            .push(format!("resume `{resume_id}` fully redacted; not assessed"));
                    }
                    state.classified.extend(sentences);
                    state.redacted.push(redacted);
                }
                Err(e) => {
                    state.counts.classify_failures += 1;
                    state.item_failures.push(ItemFailure {
                        stage: "classify".into(),
                        resume_id,
                        message: e.to_string(),
                    });
                }
            }
        }
        if attempted > 0 && state.counts.classify_failures == attempted {
            return Err((
                "classify",
                Error::stage("classify", "every resume failed classification"),
            ));
        }
        handle
            .write_jsonl(store::CLASSIFIED, &state.classified)
            .stage("classify")?;
        handle
            .write_jsonl(store::REDACTED, &state.redacted)
            .stage("classify")?;
        state.stages.push(StageTiming::new(
            "classify",
            elapsed_ms(t),
            attempted,
            llm_ms(transcript, RequestTag::Classify),
        ));

        // assess
        let t = Instant::now();
        let assess_backend =
            RecordingBackend::new(self.backends.assess.clone(), transcript.clone());
        let limit = assess_backend.max_in_flight().max(1);
        let to_assess: Vec<&RedactedResume> = state
            .redacted
            .iter()
            .filter(|r| !r.is_fully_redacted())
            .collect();
        let results: Vec<(String, Result<AgentAssessment>)> = stream::iter(0..to_assess.len())
            .map(|i| {
                let resume = to_assess[i];
                let backend = &assess_backend;
                async move {
                    let out =
                        assess_resume(resume, backend, &self.templates.assess, &cfg.assess).await;
                    (resume.resume_id.clone(), out)
                }
            })
            .buffered(limit)
            .collect()
            .await;
        let attempted = results.len();
        for (resume_id, result) in results {
            match result {
                Ok(a) => state.assessments.push(a),
                Err(e) => {
                    state.counts.assess_failures += 1;
                    state.item_failures.push(ItemFailure {
                        stage: "assess".into(),
                        resume_id,
                        message: e.to_string(),
                    });
                }
            }
        }
        state.counts.assessed = state.assessments.len();
        if attempted > 0 && state.assessments.is_empty() {
            return Err((
                "assess",
                Error::stage("assess", "every resume failed assessment"),
            ));
        }
        handle
            .write_jsonl(store::ASSESSMENTS, &state.assessments)
            .stage("assess")?;
        state.stages.push(StageTiming::new(
            "assess",
            elapsed_ms(t),
            attempted,
            llm_ms(transcript, RequestTag::Assess),
        ));

        // rank and shortlist
        let t = Instant::now();
        let ranked = rank_candidates(&state.assessments);
        state.shortlist = take_top_k(&ranked, cfg.top_k).stage("rank")?;
        state.counts.shortlisted = state.shortlist.len();
        handle
            .write_jsonl(store::SHORTLIST, &state.shortlist)
            .stage("rank")?;
        state
            .stages
            .push(StageTiming::new("rank", elapsed_ms(t), ranked.len(), 0));

        // decide
        let t = Instant::now();
        let mut decided = 0;
        match (cfg.decision_mode, state.shortlist.is_empty()) {
            (DecisionModeSetting::Manual, _) => {}
            (DecisionModeSetting::Auto, true) => {
                state
                    .warnings
                    .push("shortlist is empty; no decision made".into());
            }
            (DecisionModeSetting::Auto, false) => {
                let decide_backend =
                    RecordingBackend::new(self.backends.decide.clone(), transcript.clone());
                let (record, _) = decide_auto(
                    &handle.run_id,
                    &state.shortlist,
                    &cfg.criteria,
                    &decide_backend,
                    &self.templates.decide,
                    &cfg.decide_generation,
                )
                .await
                .stage("decide")?;
                state.decisions.push(record);
                decided = 1;
            }
        }
        handle
            .write_jsonl(store::DECISIONS, &state.decisions)
            .stage("decide")?;
        state.stages.push(StageTiming::new(
            "decide",
            elapsed_ms(t),
            decided,
            llm_ms(transcript, RequestTag::Decide),
        ));

        // evaluate
        if let Some(path) = &cfg.gold.assessments {
            let gold: Vec<AgentAssessment> = jsonl::read(path).stage("evaluate")?;
            state.evaluation =
                Some(evaluate_assessments(&state.assessments, &gold, &cfg.eval).stage("evaluate")?);
        }
        if let Some(path) = &cfg.gold.labels {
            let gold: Vec<GoldLabel> = jsonl::read(path).stage("evaluate")?;
            state.classification =
                Some(evaluate_labels(&state.classified, &gold).stage("evaluate")?);
        }
        Ok(())
    }
}

/// Pairs predicted labels with gold labels by `(id, segment_index)`.
pub fn evaluate_labels(
    classified: &[ClassifiedSentence],
    gold: &[GoldLabel],
) -> Result<crate::classify::F1Report> {
    let by_key: HashMap<(&str, usize), &ClassifiedSentence> = classified
        .iter()
        .map(|c| ((c.resume_id.as_str(), c.segment_index), c))
        .collect();
    let (pred, truth): (Vec<_>, Vec<_>) = gold
        .iter()
        .filter_map(|g| {
            by_key
                .get(&(g.id.as_str(), g.segment_index))
                .map(|c| (c.label, g.label))
        })
        .unzip();
    if pred.is_empty() {
        return Err(Error::InvalidInput(
            "no gold labels match classified sentences".into(),
        ));
    }
    eval_classification(&pred, &truth)
}

pub fn audit_prompts(classified: &[ClassifiedSentence], prompts: &[PromptRecord]) -> AuditReport {
    let docs: Vec<(String, String)> = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                format!("{}:{}", store::PROMPTS, i + 1),
                format!(
                    "{}\n{}\n{}",
                    p.system,
                    p.user,
                    p.response.as_deref().unwrap_or("")
                ),
            )
        })
        .collect();
    redaction_audit(
        classified,
        docs.iter().map(|(l, t)| (l.clone(), t.as_str())),
    )
}

fn content_hash(status: &str, state: &RunState) -> String {
    let projection = HashProjection {
        status,
        records: &state.kept,
        excluded: &state.excluded,
        classified: &state.classified,
        redacted: &state.redacted,
        assessments: state
            .assessments
            .iter()
            .map(|a| {
                let mut row = AssessmentRow::from(a.clone());
                row.latency_ms = 0;
                row
            })
            .collect(),
        shortlist: &state.shortlist,
        decisions: state
            .decisions
            .iter()
            .map(|d| {
                (
                    d.selected_ids.as_slice(),
                    d.rationale.as_str(),
                    &d.criteria,
                    d.decider.as_str(),
                )
            })
            .collect(),
        evaluation: &state.evaluation,
        classification: &state.classification,
        item_failures: &state.item_failures,
    };
    let bytes = serde_json::to_vec(&projection).expect("projection serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Validates, builds backends from config and runs into the configured store.
pub async fn run_pipeline(cfg: RunConfig) -> Result<RunReport> {
    let store = RunStore::new(cfg.store_root.clone());
    Pipeline::new(cfg)?.run(&store).await
}

/// Asks the decision agent for a finished run and appends the record.
pub async fn auto_decide_run(
    store: &RunStore,
    run_id: &str,
    criteria: &DecisionCriteria,
    backend: Option<SharedBackend>,
    force: bool,
) -> Result<DecisionRecord> {
    let report = store.load_run(run_id)?;
    if report.shortlist.is_empty() {
        return Err(Error::validation(
            "run has no shortlist",
            "criteria",
            "shortlist is empty",
        ));
    }
    let backend = match backend {
        Some(b) => b,
        None => build_backend(report.config.stage_backend("decide"))?,
    };
    let templates = report.config.templates()?;
    let transcript = Transcript::new();
    let recording: SharedBackend = Arc::new(RecordingBackend::new(backend, transcript.clone()));
    let (record, _) = decide_auto(
        run_id,
        &report.shortlist,
        criteria,
        recording.as_ref(),
        &templates.decide,
        &report.config.decide_generation,
    )
    .await?;
    store.append_decision(run_id, record.clone(), &transcript.prompts(), force)?;
    Ok(record)
}
