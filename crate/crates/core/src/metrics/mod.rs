//! Evaluation mathematics and corpus-level reports.

pub mod grades;
pub mod rank;
pub mod text;
pub mod timing;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use grades::{cosine_hist, grade_accuracy, grade_histogram, GradeHistogram, DEFAULT_BIN_WIDTH};
pub use rank::{average_ranks, kendall_tau, spearman_rho, topk_overlap, RankStats};
pub use text::{
    bleu, lcs_len, rouge_l, rouge_n, tokenize, BleuConfig, RougeScore, TOKENIZER_VERSION,
};
pub use timing::{manual_time_estimate, speedup_multiple, Speedup, READING_WPM};

use crate::assess::{grade_error_ledger, AgentAssessment, GradeErrorLedger};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricMetadata {
    pub tokenizer: String,
    pub aggregation: String,
    pub stemming: bool,
    pub stopwords_removed: bool,
    pub bleu: BleuConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
    pub bleu: f64,
    pub grade_accuracy: f64,
    pub n: usize,
    pub metadata: MetricMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub bleu: BleuConfig,
    pub top_k: usize,
    pub bin_width: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bleu: BleuConfig::default(),
            top_k: crate::decide::DEFAULT_TOP_K,
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metrics: MetricReport,
    pub rank: RankStats,
    pub pred_histogram: GradeHistogram,
    pub gold_histogram: GradeHistogram,
    pub grade_errors: GradeErrorLedger,
    /// Gold ids with no prediction; scored as grade 0 and an empty summary.
    pub missing_predictions: Vec<String>,
    pub notes: Vec<String>,
}

fn ranking_by_grade(items: &[(&str, u32)]) -> Vec<String> {
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    sorted.into_iter().map(|(id, _)| id.to_string()).collect()
}

/// Scores predictions against gold, paired by resume id.
pub fn evaluate_assessments(
    pred: &[AgentAssessment],
    gold: &[AgentAssessment],
    cfg: &EvalConfig,
) -> Result<EvaluationReport> {
    if gold.is_empty() {
        return Err(Error::InvalidInput("gold set is empty".into()));
    }
    let by_id: HashMap<&str, &AgentAssessment> =
        pred.iter().map(|a| (a.resume_id.as_str(), a)).collect();
    let mut notes = Vec::new();
    let mut missing = Vec::new();
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let mut rl = Vec::new();
    let mut bleu_scores = Vec::new();
    let mut pred_grades = Vec::new();
    let mut gold_grades = Vec::new();
    let mut matched_preds = Vec::new();

    for g in gold {
        let (summary, grade) = match by_id.get(g.resume_id.as_str()) {
            Some(p) => {
                matched_preds.push((*p).clone());
                (p.summary.as_str(), p.grade.numeric() as u32)
            }
            None => {
                missing.push(g.resume_id.clone());
                ("", 0)
            }
        };
        r1.push(rouge_n(summary, &g.summary, 1));
        r2.push(rouge_n(summary, &g.summary, 2));
        rl.push(rouge_l(summary, &g.summary));
        bleu_scores.push(bleu(summary, &g.summary, &cfg.bleu));
        pred_grades.push(grade);
        gold_grades.push(g.grade.numeric() as u32);
    }
    let extra = pred.len() - matched_preds.len();
    if extra > 0 {
        notes.push(format!("{extra} prediction(s) without gold ignored"));
    }

    let n = gold.len();
    let metrics = MetricReport {
        rouge1: RougeScore::mean(&r1),
        rouge2: RougeScore::mean(&r2),
        rouge_l: RougeScore::mean(&rl),
        bleu: bleu_scores.iter().sum::<f64>() / n as f64,
        grade_accuracy: grade_accuracy(&pred_grades, &gold_grades)?,
        n,
        metadata: MetricMetadata {
            tokenizer: TOKENIZER_VERSION.into(),
            aggregation: "mean of per-pair scores".into(),
            stemming: false,
            stopwords_removed: false,
            bleu: cfg.bleu,
        },
    };

    let px: Vec<f64> = pred_grades.iter().map(|&g| g as f64).collect();
    let gx: Vec<f64> = gold_grades.iter().map(|&g| g as f64).collect();
    let mut optional = |name: &str, r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{name} undefined: {e}"));
            None
        }
    };
    let spearman = optional("spearman_rho", spearman_rho(&px, &gx));
    let kendall = optional("kendall_tau", kendall_tau(&px, &gx));

    let pred_histogram = grade_histogram(&pred_grades, cfg.bin_width)?;
    let gold_histogram = grade_histogram(&gold_grades, cfg.bin_width)?;
    let cosine = optional("cosine", cosine_hist(&pred_histogram, &gold_histogram));

    let ids: Vec<&str> = gold.iter().map(|g| g.resume_id.as_str()).collect();
    let pred_rank = ranking_by_grade(
        &ids.iter()
            .copied()
            .zip(pred_grades.iter().copied())
            .collect::<Vec<_>>(),
    );
    let gold_rank = ranking_by_grade(
        &ids.iter()
            .copied()
            .zip(gold_grades.iter().copied())
            .collect::<Vec<_>>(),
    );
    let k = cfg.top_k.min(n);

    Ok(EvaluationReport {
        metrics,
        rank: RankStats {
            spearman_rho: spearman,
            kendall_tau: kendall,
            cosine,
            topk_overlap: topk_overlap(&pred_rank, &gold_rank, k),
            k,
        },
        pred_histogram,
        gold_histogram,
        grade_errors: grade_error_ledger(&matched_preds),
        missing_predictions: missing,
        notes,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

/// Human-readable summary using the ×100 convention for scores.
pub fn render_report(report: &EvaluationReport) -> String {
    let m = &report.metrics;
    let mut out = String::new();
    let _ = writeln!(out, "pairs evaluated   {}", m.n);
    let _ = writeln!(
        out,
        "ROUGE-1 P/R/F     {:.2} / {:.2} / {:.2}",
        m.rouge1.precision * 100.0,
        m.rouge1.recall * 100.0,
        m.rouge1.f1 * 100.0
    );
    let _ = writeln!(
        out,
        "ROUGE-2 P/R/F     {:.2} / {:.2} / {:.2}",
        m.rouge2.precision * 100.0,
        m.rouge2.recall * 100.0,
        m.rouge2.f1 * 100.0
    );
    let _ = writeln!(
        out,
        "ROUGE-L P/R/F     {:.2} / {:.2} / {:.2}",
        m.rouge_l.precision * 100.0,
        m.rouge_l.recall * 100.0,
        m.rouge_l.f1 * 100.0
    );
    let _ = writeln!(
        out,
        "BLEU              {:.2} (smoothing {})",
        m.bleu * 100.0,
        if m.metadata.bleu.smoothing {
            "on"
        } else {
            "off"
        }
    );
    let _ = writeln!(out, "grade accuracy    {:.2}", m.grade_accuracy * 100.0);
    let _ = writeln!(
        out,
        "spearman rho      {}",
        fmt_opt(report.rank.spearman_rho)
    );
    let _ = writeln!(
        out,
        "kendall tau       {}",
        fmt_opt(report.rank.kendall_tau)
    );
    let _ = writeln!(out, "histogram cosine  {}", fmt_opt(report.rank.cosine));
    let _ = writeln!(
        out,
        "top-{} overlap     {}",
        report.rank.k, report.rank.topk_overlap
    );
    let _ = writeln!(
        out,
        "pred grades       mean {:.2} std {:.2}",
        report.pred_histogram.mean, report.pred_histogram.std
    );
    let _ = writeln!(
        out,
        "grade errors      {}",
        report.grade_errors.total_errors
    );
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assess::{GradeValue, ParseStatus};

    fn a(id: &str, grade: u8, summary: &str) -> AgentAssessment {
        AgentAssessment {
            resume_id: id.into(),
            grade: GradeValue::Valid(grade),
            summary: summary.into(),
            summary_word_count: summary.split_whitespace().count(),
            raw_output: String::new(),
            parse_status: ParseStatus::Ok,
            latency_ms: 0,
            backend_name: String::new(),
            grade_fractional: false,
            summary_over_limit: false,
        }
    }

    #[test]
    fn perfect_predictions() {
        let gold = vec![
            a("1", 80, "rust dev"),
            a("2", 60, "java dev"),
            a("3", 90, "go dev"),
        ];
        let r = evaluate_assessments(&gold, &gold, &EvalConfig::default()).unwrap();
        assert_eq!(r.metrics.n, 3);
        assert_eq!(r.metrics.rouge1.f1, 1.0);
        assert_eq!(r.metrics.grade_accuracy, 1.0);
        assert_eq!(r.rank.spearman_rho, Some(1.0));
        assert_eq!(r.rank.topk_overlap, 3);
        assert!(r.missing_predictions.is_empty());
        assert!(render_report(&r).contains("grade accuracy    100.00"));
    }

    #[test]
    fn missing_prediction_scores_zero() {
        let gold = vec![a("1", 80, "rust dev"), a("2", 60, "java dev")];
        let pred = vec![a("1", 82, "rust dev"), a("9", 10, "x")];
        let r = evaluate_assessments(&pred, &gold, &EvalConfig::default()).unwrap();
        assert_eq!(r.missing_predictions, ["2"]);
        assert_eq!(r.metrics.grade_accuracy, 0.5);
        assert_eq!(r.metrics.rouge1.f1, 0.5);
        assert_eq!(r.notes.len(), 1);
    }
}
