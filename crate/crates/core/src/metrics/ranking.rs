//! Threshold selection, AUROC and AUPRC.

use std::cmp::Ordering;

use super::{check_lengths, MetricError};

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    (pos, labels.len() - pos)
}

/// Indices ordered by descending probability.
fn descending_order(probabilities: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probabilities.len()).collect();
    idx.sort_by(|&a, &b| {
        probabilities[b]
            .partial_cmp(&probabilities[a])
            .unwrap_or(Ordering::Equal)
    });
    idx
}

/// Cumulative (threshold, tp, fp) at each distinct probability, highest first.
fn operating_points(probabilities: &[f64], labels: &[u8]) -> Vec<(f64, usize, usize)> {
    let order = descending_order(probabilities);
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let threshold = probabilities[order[i]];
        while i < order.len() && probabilities[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((threshold, tp, fp));
    }
    points
}

pub fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Threshold among the observed probabilities that maximizes F1 (positive iff
/// `p >= threshold`). Ties go to the largest threshold. Returns `(threshold, f1)`.
pub fn select_threshold_f1(probabilities: &[f64], labels: &[u8]) -> Result<(f64, f64), MetricError> {
    check_lengths(probabilities, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClassValidation);
    }
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for (threshold, tp, fp) in operating_points(probabilities, labels) {
        let f1 = f1_score(tp, fp, pos - tp);
        if f1 > best.1 {
            best = (threshold, f1);
        }
    }
    Ok(best)
}

/// Area under the ROC curve as the Mann-Whitney statistic with mid-ranks for ties.
pub fn compute_auroc(probabilities: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_lengths(probabilities, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClassInput);
    }
    let mut idx: Vec<usize> = (0..probabilities.len()).collect();
    idx.sort_by(|&a, &b| {
        probabilities[a]
            .partial_cmp(&probabilities[b])
            .unwrap_or(Ordering::Equal)
    });
    // Sum of 1-based mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && probabilities[idx[j]] == probabilities[idx[i]] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        let positives = idx[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid * positives as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Area under the precision-recall curve by right-continuous steps.
///
/// Precision at each achieved recall is replaced by its envelope (the maximum
/// precision at any equal or higher recall); no linear interpolation.
pub fn compute_auprc(probabilities: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_lengths(probabilities, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClassInput);
    }
    let points = operating_points(probabilities, labels);
    let mut curve: Vec<(f64, f64)> = points
        .iter()
        .map(|&(_, tp, fp)| (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64))
        .collect();
    let mut running = 0.0_f64;
    for point in curve.iter_mut().rev() {
        running = running.max(point.1);
        point.1 = running;
    }
    let mut area = 0.0;
    let mut previous_recall = 0.0;
    for (recall, precision) in curve {
        area += (recall - previous_recall) * precision;
        previous_recall = recall;
    }
    Ok(area)
}
