//! Confusion counts, subgroup gap metrics, subsequence merging and ranking metrics.

mod confusion;
mod gaps;
mod merge;
mod ranking;
mod summary;

pub use confusion::{confusion, ConfusionCounts};
pub use gaps::{multi_group_gap, pairwise_gap, GapKind, GapValue, GroupRates};
pub use merge::{merge_subsequence_probs, tune_scaling_factor, NoteMergeInput, DEFAULT_SCALING_CANDIDATES};
pub use ranking::{compute_auprc, compute_auroc, f1_score, select_threshold_f1};
pub use summary::{summarize_gaps, GapSummary, SummaryCell};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {0} probabilities vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("{kind} rate is undefined for group `{group}` (zero denominator)")]
    UndefinedRate { kind: GapKind, group: String },
    #[error("group `{0}` not found")]
    GroupNotFound(String),
    #[error("at least two groups are required, got {0}")]
    TooFewGroups(usize),
    #[error("input contains a single label class")]
    SingleClassInput,
    #[error("validation data contains a single label class")]
    SingleClassValidation,
    #[error("no scaling-factor candidates given")]
    NoCandidates,
    #[error("invalid merge input: {0}")]
    InvalidMergeInput(String),
}

pub(crate) fn check_lengths(probabilities: &[f64], labels: &[u8]) -> Result<(), MetricError> {
    if probabilities.len() != labels.len() {
        return Err(MetricError::LengthMismatch(probabilities.len(), labels.len()));
    }
    if probabilities.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}
