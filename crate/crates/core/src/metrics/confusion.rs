use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::{check_lengths, GapKind, MetricError};

/// Per-group confusion matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Record one prediction; positive iff `probability >= threshold`.
    #[inline]
    pub fn observe(&mut self, probability: f64, label: bool, threshold: f64) {
        self.add_outcome(probability >= threshold, label);
    }

    #[inline]
    pub fn add_outcome(&mut self, predicted: bool, label: bool) {
        match (predicted, label) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// Add `weight` copies of another matrix.
    #[inline]
    pub fn add_scaled(&mut self, other: &ConfusionCounts, weight: u64) {
        self.tp += other.tp * weight;
        self.fp += other.fp * weight;
        self.tn += other.tn * weight;
        self.fn_ += other.fn_ * weight;
    }

    /// (numerator, denominator) of the rate compared by `kind`.
    pub fn rate_parts(&self, kind: GapKind) -> (u64, u64) {
        match kind {
            GapKind::Parity => (self.tp + self.fp, self.n()),
            GapKind::Recall => (self.tp, self.tp + self.fn_),
            GapKind::Specificity => (self.tn, self.tn + self.fp),
        }
    }

    pub fn rate(&self, kind: GapKind) -> Option<f64> {
        let (num, den) = self.rate_parts(kind);
        (den > 0).then(|| num as f64 / den as f64)
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.add_scaled(&rhs, 1);
    }
}

pub fn confusion(probabilities: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts, MetricError> {
    check_lengths(probabilities, labels)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(MetricError::InvalidThreshold(threshold));
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &y) in probabilities.iter().zip(labels) {
        counts.observe(p, y == 1, threshold);
    }
    Ok(counts)
}
