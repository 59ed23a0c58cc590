//! Summary-quality metrics over a shared tokenizer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Bumped whenever tokenization changes, since scores depend on it.
pub const TOKENIZER_VERSION: &str = "tok-v1";

/// Lowercases, makes every punctuation character its own token and splits
/// on whitespace. No stemming, no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace()) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(c.to_string());
        } else {
            current.extend(c.to_lowercase());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(matched: usize, cand_total: usize, ref_total: usize) -> Self {
        let precision = if cand_total == 0 {
            0.0
        } else {
            matched as f64 / cand_total as f64
        };
        let recall = if ref_total == 0 {
            0.0
        } else {
            matched as f64 / ref_total as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }

    pub fn mean(scores: &[RougeScore]) -> RougeScore {
        if scores.is_empty() {
            return RougeScore::default();
        }
        let n = scores.len() as f64;
        RougeScore {
            precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
            f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped overlap and totals for n-grams of size `n`.
fn clipped_overlap(cand: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let matched = c
        .iter()
        .map(|(gram, &count)| count.min(r.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, c.values().sum(), r.values().sum())
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> RougeScore {
    let (matched, cand_total, ref_total) =
        clipped_overlap(&tokenize(candidate), &tokenize(reference), n);
    RougeScore::from_counts(matched, cand_total, ref_total)
}

/// Longest common subsequence length, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}

pub fn rouge_l_tokens<T: PartialEq>(cand: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(cand, reference), cand.len(), reference.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuConfig {
    pub max_n: usize,
    /// Add-one smoothing on precisions for n ≥ 2.
    pub smoothing: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: false,
        }
    }
}

pub fn modified_precision(cand: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let (matched, cand_total, _) = clipped_overlap(cand, reference, n);
    (matched, cand_total)
}

pub fn bleu(candidate: &str, reference: &str, cfg: &BleuConfig) -> f64 {
    let cand = tokenize(candidate);
    let reference = tokenize(reference);
    if cand.is_empty() || cfg.max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=cfg.max_n {
        let (mut matched, mut total) = modified_precision(&cand, &reference, n);
        if cfg.smoothing && n >= 2 {
            matched += 1;
            total += 1;
        }
        if matched == 0 || total == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    let c = cand.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / cfg.max_n as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("Hello, World!"), ["hello", ",", "world", "!"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("C++ dev"), ["c", "+", "+", "dev"]);
    }

    #[test]
    fn rouge_examples() {
        let s = rouge_n("the cat sat", "the cat", 1);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 1.0).abs() < 1e-12);
        assert!((s.f1 - 0.8).abs() < 1e-12);
        assert_eq!(rouge_n("", "x", 1).f1, 0.0);
        assert_eq!(rouge_n("a b c", "a b c", 2).f1, 1.0);
        assert_eq!(rouge_n("a", "a", 2), RougeScore::default());

        let l = rouge_l("a b c d", "a c d");
        assert_eq!((l.precision, l.recall), (0.75, 1.0));
        assert!((l.f1 - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(rouge_l("x y", "p q").f1, 0.0);
    }

    #[test]
    fn bleu_examples() {
        let cfg = BleuConfig::default();
        assert!(
            (bleu(
                "the quick brown fox jumps",
                "the quick brown fox jumps",
                &cfg
            ) - 1.0)
                .abs()
                < 1e-12
        );
        let (m, t) = modified_precision(&tokenize("the the the"), &tokenize("the cat"), 1);
        assert_eq!((m, t), (1, 3));
        let two = BleuConfig {
            max_n: 2,
            smoothing: false,
        };
        assert!((bleu("a b", "a b c d", &two) - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(bleu("", "a", &cfg), 0.0);
        assert_eq!(bleu("a b c", "x y z", &cfg), 0.0);
        let smooth = BleuConfig {
            max_n: 4,
            smoothing: true,
        };
        assert!(bleu("a b x y", "a b c d", &smooth) > 0.0);
    }
}
