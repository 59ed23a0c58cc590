//! Deterministic inputs shared by the benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use screening_core::assess::{AgentAssessment, GradeValue, ParseStatus};
use screening_core::ingest::{MediaHint, RawDocument};

const VOCAB: &[&str] = &[
    "built",
    "led",
    "designed",
    "migrated",
    "services",
    "database",
    "python",
    "rust",
    "team",
    "pipeline",
    "latency",
    "reduced",
    "customers",
    "reporting",
    "cloud",
    "kubernetes",
    "analytics",
    "sql",
    "api",
    "tests",
];

pub fn words(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| *VOCAB.choose(&mut rng).expect("non-empty vocab"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A resume-shaped document with `sentences` sentences.
pub fn document(id: &str, sentences: usize, seed: u64) -> RawDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = String::from("Summary\n");
    for i in 0..sentences {
        let len = rng.random_range(6..18);
        body.push_str(&words(len, seed.wrapping_add(i as u64)));
        body.push_str(if i % 4 == 3 { ".\n" } else { ". " });
    }
    RawDocument {
        doc_id: id.to_string(),
        source_name: format!("{id}.txt"),
        media_hint: MediaHint::PlainText,
        body,
        warnings: Vec::new(),
    }
}

pub fn assessments(n: usize, seed: u64) -> Vec<AgentAssessment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| AgentAssessment {
            resume_id: format!("r{i:05}"),
            grade: GradeValue::Valid(rng.random_range(0..=100)),
            summary: String::new(),
            summary_word_count: 0,
            raw_output: String::new(),
            parse_status: ParseStatus::Ok,
            latency_ms: 0,
            backend_name: "bench".into(),
            grade_fractional: false,
            summary_over_limit: false,
        })
        .collect()
}
