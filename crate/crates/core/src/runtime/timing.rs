use serde::{Deserialize, Serialize};

use crate::metrics::{manual_time_estimate, speedup_multiple, Speedup, READING_WPM};

pub const DECIDE_STAGE: &str = "decide";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub wall_ms: u64,
    pub items: usize,
    pub llm_ms_total: u64,
}

impl StageTiming {
    pub fn new(stage: impl Into<String>, wall_ms: u64, items: usize, llm_ms_total: u64) -> Self {
        Self {
            stage: stage.into(),
            wall_ms,
            items,
            llm_ms_total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Speedups {
    pub auto: Speedup,
    pub semi_auto: Speedup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingLedger {
    pub stages: Vec<StageTiming>,
    pub total_wall_ms: u64,
    pub automated_minutes: f64,
    pub semi_automated_minutes: f64,
    pub human_decision_minutes: f64,
    pub corpus_words: u64,
    pub manual_estimate_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speedups: Option<Speedups>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn minutes(ms: u64) -> f64 {
    ms as f64 / 60_000.0
}

/// Automated time is the sum of all stages; the semi-automated variant swaps
/// the decision stage for the human estimate. `total_wall_ms` defaults to
/// the stage sum when not measured separately.
pub fn compute_timing(
    stages: Vec<StageTiming>,
    corpus_words: u64,
    human_decision_minutes: f64,
    total_wall_ms: Option<u64>,
) -> TimingLedger {
    let stage_sum: u64 = stages.iter().map(|s| s.wall_ms).sum();
    let decide_ms: u64 = stages
        .iter()
        .filter(|s| s.stage == DECIDE_STAGE)
        .map(|s| s.wall_ms)
        .sum();
    let automated_minutes = minutes(stage_sum);
    let semi_automated_minutes = minutes(stage_sum - decide_ms) + human_decision_minutes;
    let manual_estimate_min = manual_time_estimate(corpus_words, READING_WPM).unwrap_or(0.0);

    let mut notes = Vec::new();
    let items: usize = stages.iter().map(|s| s.items).sum();
    let speedups = if items == 0 || corpus_words == 0 {
        notes.push("no items processed; speedups undefined".to_string());
        None
    } else {
        match (
            speedup_multiple(manual_estimate_min, automated_minutes),
            speedup_multiple(manual_estimate_min, semi_automated_minutes),
        ) {
            (Ok(auto), Ok(semi_auto)) => Some(Speedups { auto, semi_auto }),
            _ => {
                notes.push("automated time below clock resolution; speedups undefined".to_string());
                None
            }
        }
    };

    TimingLedger {
        total_wall_ms: total_wall_ms.unwrap_or(stage_sum).max(stage_sum),
        stages,
        automated_minutes,
        semi_automated_minutes,
        human_decision_minutes,
        corpus_words,
        manual_estimate_min,
        speedups,
        notes,
    }
}
