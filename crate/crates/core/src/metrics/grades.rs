//! Grade accuracy and grade distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRADE_MARGIN: u32 = 5;
pub const DEFAULT_BIN_WIDTH: u32 = 5;

/// Fraction of predictions within ±5 of gold, boundary inclusive.
pub fn grade_accuracy(pred: &[u32], gold: &[u32]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidInput(format!(
            "prediction count {} does not match gold count {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("no grades to compare".into()));
    }
    let hits = pred
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.abs_diff(**g) <= GRADE_MARGIN)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeHistogram {
    pub bin_width: u32,
    /// counts[i] covers [i·w, (i+1)·w); 100 lands in the last bin.
    pub counts: Vec<u64>,
    pub n: u64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl GradeHistogram {
    pub fn from_counts(bin_width: u32, counts: Vec<u64>) -> Result<Self> {
        if bin_width == 0 {
            return Err(Error::InvalidInput("bin width must be positive".into()));
        }
        let n: u64 = counts.iter().sum();
        // moments approximated from bin starts
        let (mean, std) = if n == 0 {
            (0.0, 0.0)
        } else {
            let starts = (0..counts.len() as u32).map(|i| (i * bin_width) as f64);
            let pairs: Vec<(f64, f64)> = starts.zip(counts.iter().map(|&c| c as f64)).collect();
            let mean = pairs.iter().map(|(x, c)| x * c).sum::<f64>() / n as f64;
            let var = pairs
                .iter()
                .map(|(x, c)| c * (x - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            (mean, var.sqrt())
        };
        Ok(Self {
            bin_width,
            counts,
            n,
            mean,
            std,
        })
    }

    pub fn bin_starts(&self) -> Vec<u32> {
        (0..self.counts.len() as u32)
            .map(|i| i * self.bin_width)
            .collect()
    }

    /// Nonzero bins keyed by bin start.
    pub fn nonzero(&self) -> Vec<(u32, u64)> {
        self.bin_starts()
            .into_iter()
            .zip(self.counts.iter().copied())
            .filter(|(_, c)| *c > 0)
            .collect()
    }
}

pub fn grade_histogram(grades: &[u32], bin_width: u32) -> Result<GradeHistogram> {
    if bin_width == 0 || 100 % bin_width != 0 {
        return Err(Error::InvalidInput(format!(
            "bin width {bin_width} must divide 100"
        )));
    }
    if grades.is_empty() {
        return Err(Error::InvalidInput("no grades for histogram".into()));
    }
    if let Some(bad) = grades.iter().find(|g| **g > 100) {
        return Err(Error::InvalidInput(format!("grade {bad} outside 0..=100")));
    }
    let bins = (100 / bin_width) as usize;
    let mut counts = vec![0u64; bins];
    for &g in grades {
        counts[((g / bin_width) as usize).min(bins - 1)] += 1;
    }
    let n = grades.len() as f64;
    let mean = grades.iter().map(|&g| g as f64).sum::<f64>() / n;
    let var = grades
        .iter()
        .map(|&g| (g as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(GradeHistogram {
        bin_width,
        counts,
        n: grades.len() as u64,
        mean,
        std: var.sqrt(),
    })
}

pub fn cosine_hist(h1: &GradeHistogram, h2: &GradeHistogram) -> Result<f64> {
    if h1.bin_width != h2.bin_width || h1.counts.len() != h2.counts.len() {
        return Err(Error::InvalidInput(
            "histograms have different bin layouts".into(),
        ));
    }
    let dot: f64 = h1
        .counts
        .iter()
        .zip(&h2.counts)
        .map(|(a, b)| (*a as f64) * (*b as f64))
        .sum();
    let norm = |h: &GradeHistogram| {
        h.counts
            .iter()
            .map(|c| (*c as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (n1, n2) = (norm(h1), norm(h2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::InvalidInput(
            "cosine similarity of an empty histogram".into(),
        ));
    }
    Ok(dot / (n1 * n2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_boundary() {
        assert_eq!(grade_accuracy(&[80], &[85]).unwrap(), 1.0);
        assert_eq!(grade_accuracy(&[80], &[86]).unwrap(), 0.0);
        assert_eq!(
            grade_accuracy(&[70, 90, 50, 0], &[72, 96, 50, 60]).unwrap(),
            0.5
        );
        assert!(grade_accuracy(&[1], &[1, 2]).is_err());
        assert!(grade_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = grade_histogram(&[85, 87, 90], 5).unwrap();
        assert_eq!(h.nonzero(), [(85, 2), (90, 1)]);
        assert!((h.mean - 262.0 / 3.0).abs() < 1e-12);
        assert_eq!(h.counts.len(), 20);
        let z = grade_histogram(&[0, 0, 0], 5).unwrap();
        assert_eq!(z.nonzero(), [(0, 3)]);
        let top = grade_histogram(&[100, 95], 5).unwrap();
        assert_eq!(top.nonzero(), [(95, 2)]);
        assert!(grade_histogram(&[], 5).is_err());
        assert!(grade_histogram(&[101], 5).is_err());
        assert!(grade_histogram(&[1], 7).is_err());
    }

    #[test]
    fn cosine_examples() {
        let a = GradeHistogram::from_counts(50, vec![1, 2]).unwrap();
        let b = GradeHistogram::from_counts(50, vec![2, 1]).unwrap();
        assert!((cosine_hist(&a, &b).unwrap() - 0.8).abs() < 1e-12);
        let c = GradeHistogram::from_counts(50, vec![0, 3]).unwrap();
        let d = GradeHistogram::from_counts(50, vec![4, 0]).unwrap();
        assert_eq!(cosine_hist(&c, &d).unwrap(), 0.0);
        let zero = GradeHistogram::from_counts(50, vec![0, 0]).unwrap();
        assert!(cosine_hist(&a, &zero).is_err());
        let other = GradeHistogram::from_counts(25, vec![1, 2, 3, 4]).unwrap();
        assert!(cosine_hist(&a, &other).is_err());
    }
}
