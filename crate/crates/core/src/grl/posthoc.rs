use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adversarial::split_indices;
use super::net::{bce_with_logit, OutputActivation, TinyNet};
use super::GrlError;
use crate::metrics::{compute_auprc, compute_auroc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PosthocConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for PosthocConfig {
    fn default() -> Self {
        PosthocConfig {
            hidden: 16,
            epochs: 20,
            learning_rate: 0.05,
            batch_size: 32,
            holdout_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Held-out performance of a fresh classifier predicting the protected
/// attribute from frozen representations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosthocReport {
    pub auroc: f64,
    pub precision: f64,
    pub recall: f64,
    pub auprc: f64,
    pub log_loss: f64,
}

impl PosthocReport {
    /// Metric names and values in display order.
    pub fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("AUROC", self.auroc),
            ("Precision", self.precision),
            ("Recall", self.recall),
            ("AUPRC", self.auprc),
            ("Log Loss", self.log_loss),
        ]
    }
}

impl fmt::Display for PosthocReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value) in self.rows() {
            writeln!(f, "{name:<10} {value:.4}")?;
        }
        Ok(())
    }
}

/// Train a three-layer rectifier network on part of the representations and
/// score it on the rest.
pub fn posthoc_probe(
    representations: &[Vec<f64>],
    protected: &[u8],
    config: &PosthocConfig,
) -> Result<PosthocReport, GrlError> {
    if representations.len() != protected.len() {
        return Err(GrlError::DimensionMismatch {
            expected: representations.len(),
            found: protected.len(),
        });
    }
    if !(protected.contains(&0) && protected.contains(&1)) {
        return Err(GrlError::SingleClassInput("protected attribute"));
    }
    if config.batch_size == 0 || config.hidden == 0 || !(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0)
    {
        return Err(GrlError::InvalidConfig("post-hoc probe settings".into()));
    }
    let dim = representations[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = TinyNet::new(
        &[dim, config.hidden, config.hidden, 1],
        OutputActivation::Logistic,
        &mut rng,
    )?;
    let (mut train, holdout) = split_indices(representations.len(), config.holdout_fraction, &mut rng);
    let test_labels: Vec<u8> = holdout.iter().map(|&i| protected[i]).collect();
    if !(test_labels.contains(&0) && test_labels.contains(&1)) {
        return Err(GrlError::SingleClassInput("held-out protected attribute"));
    }

    for _ in 0..config.epochs {
        train.shuffle(&mut rng);
        for chunk in train.chunks(config.batch_size) {
            let mut grad = vec![0.0; net.param_count()];
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let t = net.trace(&representations[i])?;
                let (_, d) = bce_with_logit(t.logits()[0], protected[i]);
                net.backward(&t, &[d * scale], &mut grad);
            }
            net.apply_step(&grad, config.learning_rate);
        }
    }

    let mut probs = Vec::with_capacity(holdout.len());
    let mut log_loss = 0.0;
    for &i in &holdout {
        let logit = net.trace(&representations[i])?.logits()[0];
        log_loss += bce_with_logit(logit, protected[i]).0;
        probs.push(super::net::sigmoid(logit));
    }
    log_loss /= holdout.len() as f64;
    if !log_loss.is_finite() {
        return Err(GrlError::NonFiniteLoss);
    }

    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &y) in probs.iter().zip(&test_labels) {
        match (p >= 0.5, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    let auroc =
        compute_auroc(&probs, &test_labels).map_err(|_| GrlError::SingleClassInput("held-out protected attribute"))?;
    let auprc =
        compute_auprc(&probs, &test_labels).map_err(|_| GrlError::SingleClassInput("held-out protected attribute"))?;
    Ok(PosthocReport {
        auroc,
        precision: ratio(tp, fp),
        recall: ratio(tp, fn_),
        auprc,
        log_loss,
    })
}
