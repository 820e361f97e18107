//! Threshold-free ranking metrics over anomaly scores (higher = more anomalous).

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::ScoreBreakdown;

/// Anomaly scores with binary labels (`1` = anomalous, the positive class).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTestSet {
    anomaly_scores: Vec<f64>,
    labels: Vec<u8>,
    n_pos: usize,
}

impl ScoredTestSet {
    pub fn new(anomaly_scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if anomaly_scores.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: anomaly_scores.len(), found: labels.len() });
        }
        if anomaly_scores.iter().any(|s| s.is_nan()) {
            return Err(Error::domain("anomaly scores contain NaN"));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::domain("labels must be 0 or 1"));
        }
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        Ok(ScoredTestSet { anomaly_scores, labels, n_pos })
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.labels.len() - self.n_pos
    }

    pub fn scores(&self) -> &[f64] {
        &self.anomaly_scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn require_both_classes(&self) -> Result<()> {
        if self.n_pos == 0 || self.n_neg() == 0 {
            return Err(Error::UndefinedMetric("both classes must be present"));
        }
        Ok(())
    }

    /// Indices sorted by ascending score, ties adjacent.
    fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.labels.len()).collect();
        idx.sort_by(|&a, &b| self.anomaly_scores[a].partial_cmp(&self.anomaly_scores[b]).unwrap_or(Ordering::Equal));
        idx
    }

    /// Consecutive runs of equal scores in `order`, as index ranges.
    fn tie_groups(&self, order: &[usize]) -> Vec<(usize, usize)> {
        let mut groups = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && self.anomaly_scores[order[end]] == self.anomaly_scores[order[start]] {
                end += 1;
            }
            groups.push((start, end));
            start = end;
        }
        groups
    }
}

/// `−ln a`: zero for a perfect normality score, growing as the score shrinks,
/// and finite because the log-score is floored.
pub fn to_anomaly_score(breakdown: &ScoreBreakdown) -> f64 {
    -breakdown.log_score
}

/// Area under the ROC curve as the Mann–Whitney statistic: the probability that a
/// random anomalous sample outranks a random normal one, ties counting one half.
pub fn auroc(data: &ScoredTestSet) -> Result<f64> {
    data.require_both_classes()?;
    let order = data.sorted_indices();
    let mut pos_rank_sum = 0.0;
    for (start, end) in data.tie_groups(&order) {
        // 1-based ranks start+1 ..= end share their mean
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| data.labels[i] == 1).count();
        pos_rank_sum += avg_rank * positives as f64;
    }
    let (n_pos, n_neg) = (data.n_pos() as f64, data.n_neg() as f64);
    let u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

/// Average precision: `Σ precision(t) · Δrecall(t)` over descending score
/// thresholds, each group of tied scores forming a single threshold.
pub fn auprc(data: &ScoredTestSet) -> Result<f64> {
    data.require_both_classes()?;
    let mut order = data.sorted_indices();
    order.reverse();
    let n_pos = data.n_pos() as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    for (start, end) in data.tie_groups(&order) {
        let positives = order[start..end].iter().filter(|&&i| data.labels[i] == 1).count();
        tp += positives;
        fp += (end - start) - positives;
        if positives > 0 {
            ap += (tp as f64 / (tp + fp) as f64) * (positives as f64 / n_pos);
        }
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn set(pos: &[f64], neg: &[f64]) -> ScoredTestSet {
        let scores = pos.iter().chain(neg).copied().collect();
        let labels = pos.iter().map(|_| 1).chain(neg.iter().map(|_| 0)).collect();
        ScoredTestSet::new(scores, labels).unwrap()
    }

    #[test]
    fn anomaly_score_direction() {
        let b = |log_score: f64| ScoreBreakdown { numerator: 1.0, z: 1.0, score: libm::exp(log_score), log_score };
        assert_eq!(to_anomaly_score(&b(0.0)), 0.0);
        assert_eq!(to_anomaly_score(&b(-5.0)), 5.0);
        assert!(to_anomaly_score(&b(-1.0)) > to_anomaly_score(&b(-0.5)));
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&set(&[0.9], &[0.1, 0.2])).unwrap(), 1.0);
        assert_eq!(auroc(&set(&[0.1], &[0.9])).unwrap(), 0.0);
        assert_eq!(auroc(&set(&[0.5, 0.8], &[0.5, 0.2])).unwrap(), 0.875);
    }

    #[test]
    fn auprc_examples() {
        assert_eq!(auprc(&set(&[0.9, 0.8], &[0.1, 0.2, 0.3])).unwrap(), 1.0);
        assert!((auprc(&set(&[0.05], &[0.1, 0.2, 0.3, 0.4])).unwrap() - 0.2).abs() < 1e-15);
        assert!((auprc(&set(&[0.9, 0.4], &[0.6, 0.1])).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tied_threshold_is_one_cut() {
        // one positive and one negative tied at the top: precision 1/2 at recall 1
        assert_eq!(auprc(&set(&[0.7], &[0.7, 0.1])).unwrap(), 0.5);
        assert_eq!(auroc(&set(&[0.7], &[0.7])).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        let s = ScoredTestSet::new(vec![0.1, 0.2], vec![0, 0]).unwrap();
        assert!(matches!(auroc(&s), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auprc(&s), Err(Error::UndefinedMetric(_))));
        assert!(ScoredTestSet::new(vec![f64::NAN], vec![1]).is_err());
        assert!(ScoredTestSet::new(vec![0.1], vec![2]).is_err());
    }
}
