mod common;

use serde::Deserialize;

use screening_core::classify::{heuristic_classify, SentenceLabel};
use screening_core::ingest::{segment_sentences, ResumeRecord};
use screening_core::jsonl;
use screening_core::runtime::{Pipeline, RunStore, StageBackendSet};
use screening_core::{MockBackend, SharedBackend};

#[derive(Deserialize)]
struct SegCase {
    input: String,
    expected: Vec<String>,
}

#[derive(Deserialize)]
struct LabelCase {
    text: String,
    label: SentenceLabel,
}

#[test]
fn segmentation_fixture() {
    let cases: Vec<SegCase> = jsonl::read(&common::fixtures().join("segmentation.jsonl")).unwrap();
    assert_eq!(cases.len(), 20);
    for case in cases {
        let record = segment_sentences(&ResumeRecord::new("x", vec![case.input.clone()]));
        assert_eq!(record.segments, case.expected, "input: {:?}", case.input);
    }
}

#[test]
fn heuristic_agrees_with_hand_labels() {
    let cases: Vec<LabelCase> =
        jsonl::read(&common::fixtures().join("classification_gold.jsonl")).unwrap();
    assert_eq!(cases.len(), 50);
    let mut misses = Vec::new();
    for c in &cases {
        let got = heuristic_classify(&c.text);
        if got != c.label {
            misses.push(format!("{:?}: expected {}, got {}", c.text, c.label, got));
        }
    }
    let agreement = 1.0 - misses.len() as f64 / cases.len() as f64;
    println!(
        "heuristic agreement {agreement:.2}; misses:\n{}",
        misses.join("\n")
    );
    assert!(agreement >= 0.70, "agreement {agreement}");
}

#[tokio::test]
async fn fixture_run_redacts_the_personal_only_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::fixture_config(dir.path());
    let backend: SharedBackend = std::sync::Arc::new(MockBackend::new());
    let pipeline = Pipeline::with_backends(cfg, StageBackendSet::uniform(backend)).unwrap();
    let report = pipeline.run(&RunStore::new(dir.path())).await.unwrap();

    assert!(report.is_ok(), "{:?}", report.failure);
    let c = report.counts;
    assert_eq!(c.ingested, 20);
    assert_eq!(c.ingested, c.kept + c.excluded);
    assert_eq!(c.fully_redacted, 1);
    assert_eq!(c.assessed, c.kept - c.fully_redacted);
    assert_eq!(report.shortlist.len(), 10);
    assert!(report
        .warnings
        .iter()
        .any(|w| w.contains("`320` fully redacted")));
    assert!(report.audit.is_clean(), "{:?}", report.audit.leaks);
    assert!(report.audit.personal_sentences >= 20 * 3);
    assert_eq!(report.decisions.len(), 1);
    assert_eq!(
        report.decisions[0].selected_ids,
        vec![report.shortlist[0].resume_id.clone()]
    );
}
