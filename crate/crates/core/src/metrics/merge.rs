//! Note-level probability from per-subsequence probabilities.

use super::{compute_auprc, MetricError};

pub const DEFAULT_SCALING_CANDIDATES: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// Subsequence probabilities of one note plus the scaling factor `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteMergeInput {
    probabilities: Vec<f64>,
    scaling: f64,
}

impl NoteMergeInput {
    pub fn new(probabilities: Vec<f64>, scaling: f64) -> Result<Self, MetricError> {
        if probabilities.is_empty() {
            return Err(MetricError::InvalidMergeInput("no subsequence probabilities".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MetricError::InvalidMergeInput(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        if !(scaling > 0.0 && scaling.is_finite()) {
            return Err(MetricError::InvalidMergeInput(format!(
                "scaling factor must be positive, got {scaling}"
            )));
        }
        Ok(NoteMergeInput { probabilities, scaling })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn scaling(&self) -> f64 {
        self.scaling
    }
}

/// `(P_max + P_mean * n/c) / (1 + n/c)`: a blend that leans on the maximum
/// for few subsequences and on the mean as `n` grows relative to `c`.
pub fn merge_subsequence_probs(input: &NoteMergeInput) -> f64 {
    let p = &input.probabilities;
    let n = p.len() as f64;
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = p.iter().sum::<f64>() / n;
    let ratio = n / input.scaling;
    let blended = (max + mean * ratio) / (1.0 + ratio);
    // Rounding can push the blend an ulp outside [mean, max].
    blended.max(mean.min(max)).min(max)
}

/// Pick the candidate `c` with the highest validation AUPRC of merged note
/// probabilities. Ties go to the smallest `c`.
pub fn tune_scaling_factor(notes: &[(Vec<f64>, u8)], candidates: &[f64]) -> Result<f64, MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::NoCandidates);
    }
    let labels: Vec<u8> = notes.iter().map(|(_, y)| *y).collect();
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(MetricError::SingleClassValidation);
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let mut best: Option<(f64, f64)> = None;
    for c in sorted {
        let merged = notes
            .iter()
            .map(|(p, _)| NoteMergeInput::new(p.clone(), c).map(|m| merge_subsequence_probs(&m)))
            .collect::<Result<Vec<_>, _>>()?;
        let score = compute_auprc(&merged, &labels)?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    Ok(best.map(|(c, _)| c).expect("candidates is non-empty"))
}
