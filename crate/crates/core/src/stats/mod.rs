//! Bootstrap confidence intervals, the Wilcoxon signed-rank test and
//! Benjamini-Hochberg false discovery rate control.

mod bootstrap;
mod fdr;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::metrics::GapValue;

pub(crate) use bootstrap::estimate_from_replicates;
pub use bootstrap::{
    bootstrap_gap, bootstrap_weighted, percentile_ci, replicate_seed, replicate_weights, sign_p_value, BootstrapConfig,
    ReplicateSet, ResampleUnit,
};
pub use fdr::{bh_adjust, BhOutcome};
pub use wilcoxon::{
    exact_p_value, normal_approx_p_value, signed_ranks, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult,
    EXACT_MAX_N,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("{discarded} of {total} bootstrap replicates were degenerate (more than half)")]
    TooManyDegenerateReplicates { discarded: usize, total: usize },
    #[error("statistic is undefined on the full sample")]
    UndefinedStatistic,
    #[error("invalid bootstrap config: {0}")]
    InvalidConfig(String),
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("all paired differences are zero")]
    DegenerateSample,
    #[error("p-value {0} is outside [0, 1]")]
    OutOfRangeP(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

/// A gap with its bootstrap interval and significance decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub task_id: String,
    pub attribute: String,
    pub subgroup: String,
    pub point: GapValue,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
    /// Two-sided p-value from the replicate sign fraction.
    pub p_value: Option<f64>,
    pub replicates_used: usize,
    pub replicates_discarded: usize,
}

impl GapEstimate {
    pub fn with_labels(
        mut self,
        task_id: impl Into<String>,
        attribute: impl Into<String>,
        subgroup: impl Into<String>,
    ) -> Self {
        self.task_id = task_id.into();
        self.attribute = attribute.into();
        self.subgroup = subgroup.into();
        self
    }

    /// True when the interval excludes zero.
    pub fn ci_excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}
