//! Multi-label evaluation: ROC/AUC, coverage error, and label ranking
//! average precision.
//!
//! Rank-based metrics resolve ties pessimistically: the rank of a label is
//! the number of labels scored at least as high as it, itself included.
//! AUC gives half credit to tied positive/negative pairs.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::shape_err;
use crate::{Error, Result};

/// `Q x L` binary truths with matching real scores, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch {
    rows: usize,
    cols: usize,
    truths: Vec<bool>,
    scores: Vec<f64>,
}

impl EvalBatch {
    pub fn new(truths: &[Vec<f64>], scores: &[Vec<f64>]) -> Result<Self> {
        if truths.len() != scores.len() {
            return Err(shape_err!("{} truth rows vs {} score rows", truths.len(), scores.len()));
        }
        let cols = truths.first().map_or(0, Vec::len);
        let mut t = Vec::with_capacity(truths.len() * cols);
        let mut s = Vec::with_capacity(truths.len() * cols);
        for (tr, sr) in truths.iter().zip(scores) {
            if tr.len() != cols || sr.len() != cols {
                return Err(shape_err!("ragged evaluation rows ({} / {} vs {cols})", tr.len(), sr.len()));
            }
            for (&y, &p) in tr.iter().zip(sr) {
                if y != 0.0 && y != 1.0 {
                    return Err(Error::Data(format!("truth value {y} is not binary")));
                }
                if !p.is_finite() {
                    return Err(Error::NonFinite("evaluation scores"));
                }
                t.push(y == 1.0);
                s.push(p);
            }
        }
        Ok(EvalBatch { rows: truths.len(), cols, truths: t, scores: s })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn truth_row(&self, r: usize) -> &[bool] {
        &self.truths[r * self.cols..(r + 1) * self.cols]
    }

    pub fn score_row(&self, r: usize) -> &[f64] {
        &self.scores[r * self.cols..(r + 1) * self.cols]
    }

    pub fn truth_column(&self, c: usize) -> Vec<bool> {
        (0..self.rows).map(|r| self.truths[r * self.cols + c]).collect()
    }

    pub fn score_column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.scores[r * self.cols + c]).collect()
    }

    pub fn flat_truths(&self) -> &[bool] {
        &self.truths
    }

    pub fn flat_scores(&self) -> &[f64] {
        &self.scores
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are predicted positive; the first point uses
    /// `+inf`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// ROC curve by threshold sweep over distinct scores, and the area under
/// it by the trapezoid rule (equal to the Mann-Whitney statistic with half
/// credit for ties).
pub fn roc_and_auc(truth: &[bool], scores: &[f64]) -> Result<(RocCurve, f64)> {
    if truth.len() != scores.len() {
        return Err(shape_err!("{} truths vs {} scores", truth.len(), scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("roc scores"));
    }
    let positives = truth.iter().filter(|t| **t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data("AUC needs at least one positive and one negative".to_string()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp_before, fp_before) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // trapezoid between consecutive tie groups
        auc += (fp - fp_before) as f64 * (tp + tp_before) as f64 / 2.0;
        points.push(RocPoint { fpr: fp as f64 / n, tpr: tp as f64 / p, threshold });
    }
    Ok((RocCurve { points }, auc / (p * n)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucSummary {
    pub micro: f64,
    pub macro_: f64,
    /// Per-label AUC; `None` for labels with a single class.
    pub per_label: Vec<Option<f64>>,
}

impl AucSummary {
    /// Labels left out of the macro average.
    pub fn skipped_labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_label.iter().enumerate().filter(|(_, a)| a.is_none()).map(|(i, _)| i)
    }
}

/// Micro AUC over all flattened (query, label) pairs; macro AUC as the
/// unweighted mean over labels that have both classes.
pub fn micro_macro_auc(batch: &EvalBatch) -> Result<AucSummary> {
    let (_, micro) = roc_and_auc(batch.flat_truths(), batch.flat_scores())?;
    let per_label: Vec<Option<f64>> = (0..batch.cols())
        .map(|c| roc_and_auc(&batch.truth_column(c), &batch.score_column(c)).ok().map(|(_, a)| a))
        .collect();
    let valid: Vec<f64> = per_label.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::Data("no label has both classes present".to_string()));
    }
    let macro_ = valid.iter().sum::<f64>() / valid.len() as f64;
    Ok(AucSummary { micro, macro_, per_label })
}

/// Pessimistic ranks: `rank[j]` counts labels scored `>= scores[j]`.
fn pessimistic_ranks(scores: &[f64]) -> Vec<usize> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    scores
        .iter()
        .map(|s| sorted.partition_point(|x| x >= s))
        .collect()
}

/// A mean over queries, with the number of queries that had no positive
/// label and were left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankMetric {
    pub value: f64,
    pub skipped_rows: usize,
}

fn mean_over_rows(batch: &EvalBatch, per_row: impl Fn(&[bool], &[usize]) -> f64) -> Result<RankMetric> {
    let mut total = 0.0;
    let mut used = 0usize;
    for r in 0..batch.rows() {
        let truth = batch.truth_row(r);
        if !truth.iter().any(|t| *t) {
            continue;
        }
        total += per_row(truth, &pessimistic_ranks(batch.score_row(r)));
        used += 1;
    }
    if used == 0 {
        return Err(Error::Data("no query has a positive label".to_string()));
    }
    Ok(RankMetric { value: total / used as f64, skipped_rows: batch.rows() - used })
}

/// Average depth of the ranked label list needed to cover every true label.
pub fn coverage_error(batch: &EvalBatch) -> Result<RankMetric> {
    mean_over_rows(batch, |truth, ranks| {
        truth
            .iter()
            .zip(ranks)
            .filter(|(t, _)| **t)
            .map(|(_, r)| *r)
            .max()
            .unwrap_or(0) as f64
    })
}

/// Label ranking average precision.
pub fn lrap(batch: &EvalBatch) -> Result<RankMetric> {
    mean_over_rows(batch, |truth, ranks| {
        let true_ranks: Vec<usize> = truth.iter().zip(ranks).filter(|(t, _)| **t).map(|(_, r)| *r).collect();
        let sum: f64 = true_ranks
            .iter()
            .map(|&rj| true_ranks.iter().filter(|&&rk| rk <= rj).count() as f64 / rj as f64)
            .sum();
        sum / true_ranks.len() as f64
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub auc: AucSummary,
    pub coverage: RankMetric,
    pub lrap: RankMetric,
}

pub fn summarize(batch: &EvalBatch) -> Result<MetricSummary> {
    Ok(MetricSummary { auc: micro_macro_auc(batch)?, coverage: coverage_error(batch)?, lrap: lrap(batch)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn batch(t: &[&[f64]], s: &[&[f64]]) -> EvalBatch {
        let t: Vec<Vec<f64>> = t.iter().map(|r| r.to_vec()).collect();
        let s: Vec<Vec<f64>> = s.iter().map(|r| r.to_vec()).collect();
        EvalBatch::new(&t, &s).unwrap()
    }

    #[test]
    fn auc_closed_forms() {
        let (curve, auc) = roc_and_auc(&[true, false], &[0.9, 0.1]).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!(curve.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(curve.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        let (_, auc) = roc_and_auc(&[true, false], &[0.5, 0.5]).unwrap();
        assert_eq!(auc, 0.5);
        assert!(roc_and_auc(&[true, true], &[0.5, 0.2]).is_err());
    }

    #[test]
    fn micro_macro_perfect_and_constant() {
        let b = batch(&[&[1., 0.], &[0., 1.]], &[&[0.9, 0.1], &[0.2, 0.8]]);
        let s = micro_macro_auc(&b).unwrap();
        assert_eq!((s.micro, s.macro_), (1.0, 1.0));
        let b = batch(&[&[1., 0.], &[0., 1.]], &[&[0.3, 0.3], &[0.3, 0.3]]);
        assert_eq!(micro_macro_auc(&b).unwrap().micro, 0.5);
    }

    #[test]
    fn macro_skips_single_class_labels() {
        let b = batch(&[&[1., 0.], &[0., 0.]], &[&[0.9, 0.1], &[0.2, 0.8]]);
        let s = micro_macro_auc(&b).unwrap();
        assert_eq!(s.per_label, vec![Some(1.0), None]);
        assert_eq!(s.skipped_labels().collect::<Vec<_>>(), vec![1]);
        assert_eq!(s.macro_, 1.0);
    }

    #[test]
    fn coverage_examples() {
        let b = batch(&[&[1., 0., 0.]], &[&[0.9, 0.5, 0.1]]);
        assert_eq!(coverage_error(&b).unwrap().value, 1.0);
        let b = batch(&[&[0., 0., 1.]], &[&[0.9, 0.5, 0.1]]);
        assert_eq!(coverage_error(&b).unwrap().value, 3.0);
        // ties count against the true label
        let b = batch(&[&[1., 0., 0.]], &[&[0.5, 0.5, 0.5]]);
        assert_eq!(coverage_error(&b).unwrap().value, 3.0);
    }

    #[test]
    fn lrap_examples() {
        let b = batch(&[&[1., 1., 0.]], &[&[0.9, 0.8, 0.1]]);
        assert_eq!(lrap(&b).unwrap().value, 1.0);
        let b = batch(&[&[0., 1.]], &[&[0.9, 0.1]]);
        assert_eq!(lrap(&b).unwrap().value, 0.5);
    }

    #[test]
    fn rows_without_positives_are_skipped() {
        let b = batch(&[&[0., 0.], &[0., 1.]], &[&[0.9, 0.1], &[0.9, 0.1]]);
        let c = coverage_error(&b).unwrap();
        assert_eq!((c.value, c.skipped_rows), (2.0, 1));
        let b = batch(&[&[0., 0.]], &[&[0.9, 0.1]]);
        assert!(lrap(&b).is_err());
    }

    #[test]
    fn batch_validation() {
        assert!(EvalBatch::new(&[vec![0.5]], &[vec![0.5]]).is_err());
        assert!(EvalBatch::new(&[vec![1.0]], &[vec![0.5, 0.2]]).is_err());
        assert!(EvalBatch::new(&[vec![1.0]], &[vec![f64::NAN]]).is_err());
    }
}
