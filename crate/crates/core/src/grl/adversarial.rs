use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{bce_with_logit, OutputActivation, TinyNet};
use super::synthetic::LabeledData;
use super::{grl_backward, grl_forward, GrlError};

/// Layer widths of every network in an [`AdvSetup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    /// Encoder widths, input first and representation last.
    pub encoder: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub task_heads: usize,
    pub discriminators: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            encoder: vec![4, 16, 8],
            head_hidden: vec![8],
            discriminator_hidden: vec![16, 16],
            task_heads: 1,
            discriminators: 2,
        }
    }
}

/// Encoder, task heads and discriminators. An empty discriminator list is
/// the no-adversary baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvSetup {
    pub encoder: TinyNet,
    pub task_heads: Vec<TinyNet>,
    pub discriminators: Vec<TinyNet>,
}

fn head_dims(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(1);
    d
}

impl AdvSetup {
    /// Networks are drawn in a fixed order (encoder, heads, discriminators)
    /// from one seeded stream, so the encoder and heads do not depend on how
    /// many discriminators follow.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self, GrlError> {
        if arch.task_heads == 0 || arch.task_heads > 2 || arch.discriminators > 2 {
            return Err(GrlError::InvalidArchitecture(format!(
                "{} task heads and {} discriminators (allowed 1-2 and 0-2)",
                arch.task_heads, arch.discriminators
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = TinyNet::new(&arch.encoder, OutputActivation::Linear, &mut rng)?;
        let rep = encoder.output_dim();
        let task_heads = (0..arch.task_heads)
            .map(|_| TinyNet::new(&head_dims(rep, &arch.head_hidden), OutputActivation::Logistic, &mut rng))
            .collect::<Result<_, _>>()?;
        let discriminators = (0..arch.discriminators)
            .map(|_| {
                TinyNet::new(
                    &head_dims(rep, &arch.discriminator_hidden),
                    OutputActivation::Logistic,
                    &mut rng,
                )
            })
            .collect::<Result<_, _>>()?;
        let setup = AdvSetup {
            encoder,
            task_heads,
            discriminators,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<(), GrlError> {
        let rep = self.encoder.output_dim();
        for net in self.task_heads.iter().chain(&self.discriminators) {
            if net.input_dim() != rep {
                return Err(GrlError::DimensionMismatch {
                    expected: rep,
                    found: net.input_dim(),
                });
            }
            if net.output_dim() != 1 || net.output_activation() != OutputActivation::Logistic {
                return Err(GrlError::InvalidArchitecture(
                    "heads and discriminators need one logistic output".into(),
                ));
            }
        }
        if self.task_heads.is_empty() {
            return Err(GrlError::InvalidArchitecture("no task head".into()));
        }
        Ok(())
    }
}

/// Mean losses over a batch. `total` is task plus adversary loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub task: f64,
    pub adversary: f64,
    pub total: f64,
}

/// Gradients laid out like [`TinyNet::params`] for each network.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupGradients {
    pub encoder: Vec<f64>,
    pub task_heads: Vec<Vec<f64>>,
    pub discriminators: Vec<Vec<f64>>,
}

/// Loss and gradients for one batch. Heads and discriminators receive the
/// ordinary gradients of their own losses; the encoder receives the task
/// gradient plus the discriminator gradient passed back through the
/// reversal junction, i.e. the gradient of `task - lambda * adversary`.
pub fn total_loss(
    setup: &AdvSetup,
    features: &[Vec<f64>],
    labels: &[u8],
    protected: &[u8],
    lambda: f64,
) -> Result<(LossReport, SetupGradients), GrlError> {
    if labels.len() != features.len() || protected.len() != features.len() {
        return Err(GrlError::DimensionMismatch {
            expected: features.len(),
            found: if labels.len() != features.len() {
                labels.len()
            } else {
                protected.len()
            },
        });
    }
    if features.is_empty() {
        return Err(GrlError::InvalidConfig("empty batch".into()));
    }
    let scale = 1.0 / features.len() as f64;
    let mut grads = SetupGradients {
        encoder: vec![0.0; setup.encoder.param_count()],
        task_heads: setup.task_heads.iter().map(|n| vec![0.0; n.param_count()]).collect(),
        discriminators: setup
            .discriminators
            .iter()
            .map(|n| vec![0.0; n.param_count()])
            .collect(),
    };
    let (mut task, mut adversary) = (0.0, 0.0);
    let rep = setup.encoder.output_dim();

    for ((x, &y), &z) in features.iter().zip(labels).zip(protected) {
        let enc = setup.encoder.trace(x)?;
        let h = enc.logits();

        let mut d_h = vec![0.0; rep];
        for (head, g) in setup.task_heads.iter().zip(&mut grads.task_heads) {
            let t = head.trace(h)?;
            let (loss, d) = bce_with_logit(t.logits()[0], y);
            task += loss * scale;
            for (acc, v) in d_h.iter_mut().zip(head.backward(&t, &[d * scale], g)) {
                *acc += v;
            }
        }

        let j = grl_forward(h);
        let mut d_j = vec![0.0; rep];
        for (disc, g) in setup.discriminators.iter().zip(&mut grads.discriminators) {
            let t = disc.trace(&j)?;
            let (loss, d) = bce_with_logit(t.logits()[0], z);
            adversary += loss * scale;
            for (acc, v) in d_j.iter_mut().zip(disc.backward(&t, &[d * scale], g)) {
                *acc += v;
            }
        }
        // With lambda = 0 the reversed term is skipped rather than added as
        // zeros, so the encoder gradient matches the baseline bit for bit.
        if lambda != 0.0 && !setup.discriminators.is_empty() {
            for (acc, v) in d_h.iter_mut().zip(grl_backward(&d_j, lambda)) {
                *acc += v;
            }
        }
        setup.encoder.backward(&enc, &d_h, &mut grads.encoder);
    }

    let total = task + adversary;
    if !total.is_finite() {
        return Err(GrlError::NonFiniteLoss);
    }
    Ok((LossReport { task, adversary, total }, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrlConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of samples held out for the reported accuracies.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for GrlConfig {
    fn default() -> Self {
        GrlConfig {
            lambda: 1.0,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 32,
            holdout_fraction: 0.25,
            seed: 0,
        }
    }
}

impl GrlConfig {
    pub fn validate(&self) -> Result<(), GrlError> {
        let bad = |m: &str| Err(GrlError::InvalidConfig(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite value >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training losses over the epoch's batches.
    pub task_loss: f64,
    pub adversary_loss: f64,
    pub task_accuracy: f64,
    /// Accuracy of the first discriminator, when there is one.
    pub adversary_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub lambda: f64,
    pub seed: u64,
    pub train_samples: usize,
    pub holdout_samples: usize,
    pub epochs: Vec<EpochStats>,
    pub final_task_accuracy: f64,
    pub final_adversary_accuracy: Option<f64>,
    /// Majority-class rate of the protected attribute on the holdout.
    pub adversary_chance: f64,
}

/// Encoder outputs for every row.
pub fn encode(setup: &AdvSetup, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, GrlError> {
    features.iter().map(|x| setup.encoder.forward(x)).collect()
}

fn accuracy(net: &TinyNet, reps: &[Vec<f64>], targets: &[u8]) -> Result<f64, GrlError> {
    let mut correct = 0usize;
    for (h, &t) in reps.iter().zip(targets) {
        let p = net.forward(h)?[0];
        if (p >= 0.5) == (t == 1) {
            correct += 1;
        }
    }
    Ok(correct as f64 / targets.len() as f64)
}

/// Deterministic shuffled split into (train, holdout) index lists.
pub(crate) fn split_indices(n: usize, holdout_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let holdout = ((n as f64 * holdout_fraction).round() as usize).clamp(1, n.saturating_sub(1));
    let train = idx.split_off(holdout);
    (train, idx)
}

fn require_both(values: &[u8], what: &'static str) -> Result<(), GrlError> {
    if values.contains(&0) && values.contains(&1) {
        Ok(())
    } else {
        Err(GrlError::SingleClassInput(what))
    }
}

/// Minibatch SGD on every network at once. Deterministic given the setup
/// and `config.seed`.
pub fn train_adversarial(
    data: &LabeledData,
    setup: &mut AdvSetup,
    config: &GrlConfig,
) -> Result<TrainReport, GrlError> {
    config.validate()?;
    setup.validate()?;
    require_both(&data.labels, "task label")?;
    require_both(&data.protected, "protected attribute")?;
    if data.len() < 2 {
        return Err(GrlError::InvalidConfig("need at least two samples".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut train, holdout_idx) = split_indices(data.len(), config.holdout_fraction, &mut rng);
    let holdout = data.subset(&holdout_idx);
    let ones = holdout.protected.iter().filter(|&&z| z == 1).count() as f64 / holdout.len() as f64;

    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        train.shuffle(&mut rng);
        let (mut task_sum, mut adv_sum, mut batches) = (0.0, 0.0, 0usize);
        for chunk in train.chunks(config.batch_size) {
            let batch = data.subset(chunk);
            let (loss, grads) = total_loss(setup, &batch.features, &batch.labels, &batch.protected, config.lambda)
                .map_err(|e| match e {
                    GrlError::NonFiniteLoss => GrlError::Divergence { epoch },
                    other => other,
                })?;
            setup.encoder.apply_step(&grads.encoder, config.learning_rate);
            for (net, g) in setup.task_heads.iter_mut().zip(&grads.task_heads) {
                net.apply_step(g, config.learning_rate);
            }
            for (net, g) in setup.discriminators.iter_mut().zip(&grads.discriminators) {
                net.apply_step(g, config.learning_rate);
            }
            task_sum += loss.task;
            adv_sum += loss.adversary;
            batches += 1;
        }
        let reps = encode(setup, &holdout.features)?;
        if reps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GrlError::Divergence { epoch });
        }
        epochs.push(EpochStats {
            epoch,
            task_loss: task_sum / batches.max(1) as f64,
            adversary_loss: adv_sum / batches.max(1) as f64,
            task_accuracy: accuracy(&setup.task_heads[0], &reps, &holdout.labels)?,
            adversary_accuracy: setup
                .discriminators
                .first()
                .map(|d| accuracy(d, &reps, &holdout.protected))
                .transpose()?,
        });
    }

    let last = epochs.last();
    Ok(TrainReport {
        lambda: config.lambda,
        seed: config.seed,
        train_samples: train.len(),
        holdout_samples: holdout.len(),
        final_task_accuracy: last.map_or(0.0, |e| e.task_accuracy),
        final_adversary_accuracy: last.and_then(|e| e.adversary_accuracy),
        adversary_chance: ones.max(1.0 - ones),
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(encoder: &[usize], discriminators: usize) -> Architecture {
        Architecture {
            encoder: encoder.to_vec(),
            head_hidden: vec![3],
            discriminator_hidden: vec![3, 3],
            task_heads: 2,
            discriminators,
        }
    }

    #[test]
    fn lambda_zero_matches_baseline_encoder_gradient() {
        let with_adv = AdvSetup::new(&arch(&[3, 4, 2], 2), 5).unwrap();
        let baseline = AdvSetup::new(&arch(&[3, 4, 2], 0), 5).unwrap();
        assert_eq!(with_adv.encoder, baseline.encoder);
        let x = vec![vec![0.3, -1.2, 0.8], vec![1.0, 0.1, -0.4]];
        let (_, g_adv) = total_loss(&with_adv, &x, &[1, 0], &[0, 1], 0.0).unwrap();
        let (_, g_base) = total_loss(&baseline, &x, &[1, 0], &[0, 1], 0.0).unwrap();
        assert_eq!(g_adv.encoder, g_base.encoder);
        assert_eq!(g_adv.task_heads, g_base.task_heads);
    }

    #[test]
    fn reversal_changes_only_encoder() {
        let setup = AdvSetup::new(&arch(&[3, 4, 2], 1), 9).unwrap();
        let x = vec![vec![0.3, -1.2, 0.8]];
        let (l0, g0) = total_loss(&setup, &x, &[1], &[1], 0.0).unwrap();
        let (l1, g1) = total_loss(&setup, &x, &[1], &[1], 1.0).unwrap();
        assert_eq!(l0, l1);
        assert_eq!(g0.task_heads, g1.task_heads);
        assert_eq!(g0.discriminators, g1.discriminators);
        assert_ne!(g0.encoder, g1.encoder);
    }

    #[test]
    fn too_many_discriminators() {
        assert!(AdvSetup::new(&arch(&[3, 2], 3), 0).is_err());
    }

    #[test]
    fn mismatched_batch() {
        let setup = AdvSetup::new(&arch(&[3, 2], 1), 0).unwrap();
        assert!(total_loss(&setup, &[vec![0.0; 3]], &[1, 0], &[1], 1.0).is_err());
        assert!(total_loss(&setup, &[vec![0.0; 2]], &[1], &[1], 1.0).is_err());
    }
}
