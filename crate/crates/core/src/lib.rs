//! Fairness auditing for probabilistic clinical classifiers and masked language models.
//!
//! * [`audit`]: the end-to-end gap audit and its reports.
//! * [`data`]: prediction files, group policies, note preparation.
//! * [`metrics`]: confusion counts, subgroup gaps, subsequence merging, ranking metrics.
//! * [`stats`]: bootstrap intervals, Wilcoxon signed-rank, Benjamini-Hochberg.
//! * [`probe`]: log-probability bias scores over a masked language model.
//! * [`grl`]: adversarial debiasing through gradient reversal.

pub mod audit;
pub mod data;
pub mod grl;
pub mod metrics;
pub mod probe;
pub mod stats;
