use serde::{Deserialize, Serialize};

use crate::classify::{ClassifiedSentence, SentenceLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leak {
    pub resume_id: String,
    pub segment_index: usize,
    /// Caller-supplied label of the scanned text, e.g. `prompts.jsonl:4`.
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct AuditReport {
    pub scanned: usize,
    pub personal_sentences: usize,
    pub leaks: Vec<Leak>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.leaks.is_empty()
    }
}

/// Looks for the text of every personal-information sentence inside each
/// scanned document.
pub fn redaction_audit<'a>(
    classified: &[ClassifiedSentence],
    documents: impl IntoIterator<Item = (String, &'a str)>,
) -> AuditReport {
    let personal: Vec<&ClassifiedSentence> = classified
        .iter()
        .filter(|c| c.label == SentenceLabel::PersonalInformation && !c.text.trim().is_empty())
        .collect();
    let mut report = AuditReport {
        personal_sentences: personal.len(),
        ..AuditReport::default()
    };
    for (location, text) in documents {
        report.scanned += 1;
        for p in &personal {
            if text.contains(p.text.trim()) {
                report.leaks.push(Leak {
                    resume_id: p.resume_id.clone(),
                    segment_index: p.segment_index,
                    location: location.clone(),
                });
            }
        }
    }
    report
}
