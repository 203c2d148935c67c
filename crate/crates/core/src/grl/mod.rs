//! Small-scale adversarial debiasing through a gradient-reversal junction.
//!
//! An encoder feeds one or two task heads and one or two discriminators that
//! try to recover a protected attribute. The junction between encoder and
//! discriminators is the identity on the forward pass and multiplies the
//! gradient by `-lambda` on the way back. Backprop is written out by hand so
//! the reversal is explicit and checkable against finite differences.

mod adversarial;
mod net;
mod posthoc;
mod synthetic;

pub use adversarial::{
    encode, total_loss, train_adversarial, AdvSetup, Architecture, EpochStats, GrlConfig, LossReport, SetupGradients,
    TrainReport,
};
pub use net::{bce_with_logit, sigmoid, OutputActivation, TinyNet, Trace};
pub use posthoc::{posthoc_probe, PosthocConfig, PosthocReport};
pub use synthetic::{gen_synthetic, LabeledData, SyntheticDataSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrlError {
    #[error("invalid architecture {0}")]
    InvalidArchitecture(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("{0} has a single class")]
    SingleClassInput(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Forward pass of the junction: the identity.
pub fn grl_forward(h: &[f64]) -> Vec<f64> {
    h.to_vec()
}

/// Backward pass of the junction: `-lambda * g`.
pub fn grl_backward(g: &[f64], lambda: f64) -> Vec<f64> {
    g.iter().map(|v| -lambda * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_identity() {
        assert_eq!(grl_forward(&[0.2, -0.3]), vec![0.2, -0.3]);
    }

    #[test]
    fn backward_flips_and_scales() {
        assert_eq!(grl_backward(&[0.2, -0.3], 1.0), vec![-0.2, 0.3]);
        assert!(grl_backward(&[0.2, -0.3], 0.0).iter().all(|v| *v == 0.0));
        assert_eq!(grl_backward(&[1.0, 1.0], 2.0), vec![-2.0, -2.0]);
    }
}
