//! Scoring of probabilistic binary predictions.
//!
//! AUROC is computed from the Mann–Whitney statistic via rank sums with
//! midranks for ties, equivalent to counting score-ordered
//! (positive, negative) pairs with ties worth one half. Per-fold scores are
//! aggregated to repetition means and an overall mean of repetition means.

use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("label at index {0} is {1}, expected 0 or 1")]
    BadLabel(usize, u8),
    #[error("no scorable repetitions (all folds lack both classes)")]
    NothingToAggregate,
}

/// AUROC of one scored fold. `auroc` is present iff both classes occur.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldScore {
    pub auroc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Rank-sum AUROC with midranks for ties; O(n log n).
///
/// Higher scores mean "more likely positive". A single-class fold yields
/// `auroc: None` rather than an error; a non-finite score is an error.
pub fn auroc<F: Scalar>(scores: &[F], labels: &[u8]) -> Result<FoldScore, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (i, s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(MetricsError::NonFiniteScore(i));
        }
    }
    for (i, &y) in labels.iter().enumerate() {
        if y > 1 {
            return Err(MetricsError::BadLabel(i, y));
        }
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(FoldScore {
            auroc: None,
            n_pos,
            n_neg,
        });
    }

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[a as usize]
            .partial_cmp(&scores[b as usize])
            .expect("scores are finite")
    });

    // Walk tie groups (exact equality) assigning 1-based midranks.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j] as usize] == scores[order[i] as usize] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx as usize] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }

    let u = rank_sum_pos - (n_pos as f64) * (n_pos as f64 + 1.0) / 2.0;
    Ok(FoldScore {
        auroc: Some(u / (n_pos as f64 * n_neg as f64)),
        n_pos,
        n_neg,
    })
}

/// Aggregation of per-fold AUROCs to repetition means and an overall mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// `(repetition, mean over non-missing folds)`, sorted by repetition.
    pub per_repetition: Vec<(usize, f64)>,
    /// Mean of repetition means.
    pub overall: f64,
    /// Folds that carried no AUROC.
    pub missing_folds: usize,
    /// Repetitions dropped because every fold was missing.
    pub dropped_repetitions: usize,
}

/// Aggregates `(repetition, auroc)` fold scores.
///
/// A repetition mean averages the repetition's non-missing folds; the
/// overall value is the mean of repetition means, not a pooled fold mean.
/// Repetitions with no scorable fold are excluded and counted.
pub fn aggregate(fold_scores: &[(usize, Option<f64>)]) -> Result<Aggregate, MetricsError> {
    if fold_scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut by_rep: Vec<(usize, f64, usize, usize)> = Vec::new(); // rep, sum, n, missing
    for &(rep, score) in fold_scores {
        let slot = match by_rep.iter_mut().find(|e| e.0 == rep) {
            Some(e) => e,
            None => {
                by_rep.push((rep, 0.0, 0, 0));
                by_rep.last_mut().unwrap()
            }
        };
        match score {
            Some(a) => {
                slot.1 += a;
                slot.2 += 1;
            }
            None => slot.3 += 1,
        }
    }
    by_rep.sort_unstable_by_key(|e| e.0);

    let missing_folds = by_rep.iter().map(|e| e.3).sum();
    let dropped = by_rep.iter().filter(|e| e.2 == 0).count();
    let per_repetition: Vec<(usize, f64)> = by_rep
        .iter()
        .filter(|e| e.2 > 0)
        .map(|e| (e.0, e.1 / e.2 as f64))
        .collect();
    if per_repetition.is_empty() {
        return Err(MetricsError::NothingToAggregate);
    }
    let overall =
        per_repetition.iter().map(|&(_, m)| m).sum::<f64>() / per_repetition.len() as f64;
    Ok(Aggregate {
        per_repetition,
        overall,
        missing_folds,
        dropped_repetitions: dropped,
    })
}
