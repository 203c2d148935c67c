use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::GrlError;

/// What the last layer emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    /// Raw pre-activations (used for representations).
    Linear,
    /// Logistic probabilities; losses are computed from the logits.
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

/// Fully connected network with rectifier hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyNet {
    layers: Vec<Layer>,
    output: OutputActivation,
}

/// Pre-activations of every layer for one input, kept for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    /// Last-layer pre-activations (logits for a logistic net).
    pub fn logits(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit against a 0/1 label, and its derivative
/// with respect to the logit.
pub fn bce_with_logit(logit: f64, label: u8) -> (f64, f64) {
    let y = f64::from(label);
    // softplus(z) - y z, written to avoid overflow.
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    (softplus - y * logit, sigmoid(logit) - y)
}

impl TinyNet {
    /// He-initialized network with the given layer widths (input first).
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self, GrlError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(GrlError::InvalidArchitecture(format!("{dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive std");
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    weights: (0..w[0] * w[1]).map(|_| normal.sample(rng)).collect(),
                    biases: vec![0.0; w[1]],
                }
            })
            .collect();
        Ok(TinyNet { layers, output })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All weights and biases, layer by layer (weights before biases).
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter vector length");
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + n]);
            at += n;
            let n = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + n]);
            at += n;
        }
    }

    /// `params -= step * grad`.
    pub fn apply_step(&mut self, grad: &[f64], step: f64) {
        assert_eq!(grad.len(), self.param_count(), "gradient vector length");
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w -= step * grad[at];
                at += 1;
            }
        }
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace, GrlError> {
        if x.len() != self.input_dim() {
            return Err(GrlError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.apply(&a);
            if i + 1 < self.layers.len() {
                a = relu(&z);
            }
            pre.push(z);
        }
        Ok(Trace { input: x.to_vec(), pre })
    }

    /// Network output: probabilities for a logistic net, raw values otherwise.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, GrlError> {
        let t = self.trace(x)?;
        Ok(match self.output {
            OutputActivation::Linear => t.logits().to_vec(),
            OutputActivation::Logistic => t.logits().iter().map(|&z| sigmoid(z)).collect(),
        })
    }

    /// Accumulate parameter gradients into `grad` given the derivative of the
    /// loss with respect to the last-layer pre-activations; returns the
    /// derivative with respect to the input.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.param_count(), "gradient vector length");
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for l in &self.layers {
            offsets.push(at);
            at += l.weights.len() + l.biases.len();
        }
        let mut delta = d_out.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input: Vec<f64> = if i == 0 {
                trace.input.clone()
            } else {
                relu(&trace.pre[i - 1])
            };
            let (w_grad, b_grad) =
                grad[offsets[i]..offsets[i] + l.weights.len() + l.biases.len()].split_at_mut(l.weights.len());
            for o in 0..l.outputs {
                for (j, &v) in input.iter().enumerate() {
                    w_grad[o * l.inputs + j] += delta[o] * v;
                }
                b_grad[o] += delta[o];
            }
            let mut d_in = vec![0.0; l.inputs];
            for (o, &d) in delta.iter().enumerate() {
                for (j, slot) in d_in.iter_mut().enumerate() {
                    *slot += l.weights[o * l.inputs + j] * d;
                }
            }
            if i > 0 {
                for (slot, &z) in d_in.iter_mut().zip(&trace.pre[i - 1]) {
                    if z <= 0.0 {
                        *slot = 0.0;
                    }
                }
            }
            delta = d_in;
        }
        delta
    }
}
