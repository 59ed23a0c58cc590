//! Rank agreement between two gradings of the same candidates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub spearman_rho: Option<f64>,
    pub kendall_tau: Option<f64>,
    pub cosine: Option<f64>,
    pub topk_overlap: usize,
    pub k: usize,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "rankings differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(
            "rank statistics need at least 2 items".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("rankings must be finite".into()));
    }
    Ok(())
}

/// 1-based ranks; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidInput(
            "correlation undefined for a constant ranking".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    if has_ties(x) || has_ties(y) {
        return pearson(&rx, &ry);
    }
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Tau-a on tie-free data, tau-b otherwise.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {
                    tie_x += 1;
                    tie_y += 1;
                }
                (0, _) => tie_x += 1,
                (_, 0) => tie_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let s = (concordant - discordant) as f64;
    if tie_x == 0 && tie_y == 0 {
        return Ok(s / pairs);
    }
    let denom = ((pairs - tie_x as f64) * (pairs - tie_y as f64)).sqrt();
    if denom == 0.0 {
        return Err(Error::InvalidInput(
            "correlation undefined for a constant ranking".into(),
        ));
    }
    Ok(s / denom)
}

/// Size of the intersection of the two top-k prefixes.
pub fn topk_overlap<T: Eq + std::hash::Hash>(rank_a: &[T], rank_b: &[T], k: usize) -> usize {
    let a: HashSet<&T> = rank_a.iter().take(k).collect();
    rank_b
        .iter()
        .take(k)
        .filter(|id| a.contains(id))
        .collect::<HashSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman_rho(&[1., 2., 3., 4.], &[2., 1., 4., 3.]).unwrap() - 0.6).abs() < 1e-12);
        assert!((spearman_rho(&[1., 2., 3.], &[1., 2., 3.]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman_rho(&[1.], &[1.]).is_err());
        assert!(spearman_rho(&[1., 1.], &[1., 2.]).is_err());
        // ties: ranks x=[1.5,1.5,3], y=[1,2,3]; pearson by hand = 0.8660...
        let tied = spearman_rho(&[5., 5., 9.], &[1., 2., 3.]).unwrap();
        assert!((tied - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_examples() {
        assert!((kendall_tau(&[1., 2., 3.], &[1., 3., 2.]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(kendall_tau(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        // tau-b: x=[1,1,2], y=[1,2,3]: C=2, D=0, ties_x=1 → 2/sqrt(2*3)
        let b = kendall_tau(&[1., 1., 2.], &[1., 2., 3.]).unwrap();
        assert!((b - 2.0 / 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let a: Vec<u32> = (1..=12).collect();
        let mut b: Vec<u32> = (1..=11).collect();
        b.push(99);
        assert_eq!(topk_overlap(&a, &b, 12), 11);
        assert_eq!(topk_overlap(&a, &a, 10), 10);
        assert_eq!(topk_overlap(&[1, 2], &[3, 4], 2), 0);
    }
}
