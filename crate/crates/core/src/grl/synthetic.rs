use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::GrlError;

/// Two Gaussian feature blocks: one shifted by the task label, one by the
/// protected attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticDataSpec {
    pub samples: usize,
    pub task_dims: usize,
    pub protected_dims: usize,
    /// Distance between the class means on each task dimension.
    pub task_shift: f64,
    /// Distance between the group means on each protected dimension.
    pub protected_shift: f64,
    pub noise: f64,
    /// Correlation between label and protected attribute, in [-1, 1].
    pub correlation: f64,
    pub seed: u64,
}

impl Default for SyntheticDataSpec {
    fn default() -> Self {
        SyntheticDataSpec {
            samples: 2000,
            task_dims: 2,
            protected_dims: 2,
            task_shift: 3.0,
            protected_shift: 3.0,
            noise: 1.0,
            correlation: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticDataSpec {
    pub fn validate(&self) -> Result<(), GrlError> {
        let bad = |m: String| Err(GrlError::InvalidConfig(m));
        if self.samples == 0 || self.task_dims + self.protected_dims == 0 {
            return bad("need at least one sample and one feature".into());
        }
        if !(self.task_shift >= 0.0 && self.protected_shift >= 0.0 && self.noise >= 0.0) {
            return bad("shifts and noise must be non-negative".into());
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return bad(format!("correlation {} outside [-1, 1]", self.correlation));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledData {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub protected: Vec<u8>,
}

impl LabeledData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledData {
        LabeledData {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            protected: indices.iter().map(|&i| self.protected[i]).collect(),
        }
    }

    /// CSV with columns `x0..x{d-1},label,protected`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let dims = self.features.first().map_or(0, Vec::len);
        let mut header: Vec<String> = (0..dims).map(|i| format!("x{i}")).collect();
        header.extend(["label".to_string(), "protected".to_string()]);
        w.write_record(&header)?;
        for ((x, y), z) in self.features.iter().zip(&self.labels).zip(&self.protected) {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.push(y.to_string());
            row.push(z.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn block<R: Rng>(rng: &mut R, dims: usize, positive: bool, shift: f64, noise: &Option<Normal<f64>>) -> Vec<f64> {
    let centre = if positive { shift / 2.0 } else { -shift / 2.0 };
    (0..dims)
        .map(|_| centre + noise.as_ref().map_or(0.0, |n| n.sample(rng)))
        .collect()
}

/// Draw a dataset. The protected attribute is a fair coin and the label
/// agrees with it with probability `(1 + correlation) / 2`.
pub fn gen_synthetic(spec: &SyntheticDataSpec) -> Result<LabeledData, GrlError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("noise is positive"));
    let agree = (1.0 + spec.correlation) / 2.0;
    let mut data = LabeledData {
        features: Vec::with_capacity(spec.samples),
        labels: Vec::with_capacity(spec.samples),
        protected: Vec::with_capacity(spec.samples),
    };
    for _ in 0..spec.samples {
        let z = rng.random_bool(0.5);
        let y = if rng.random_bool(agree) { z } else { !z };
        let mut x = block(&mut rng, spec.task_dims, y, spec.task_shift, &noise);
        x.extend(block(&mut rng, spec.protected_dims, z, spec.protected_shift, &noise));
        data.features.push(x);
        data.labels.push(u8::from(y));
        data.protected.push(u8::from(z));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn correlation(a: &[u8], b: &[u8]) -> f64 {
        let n = a.len() as f64;
        let mean = |v: &[u8]| v.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (f64::from(x) - ma) * (f64::from(y) - mb))
            .sum();
        let var = |v: &[u8], m: f64| v.iter().map(|&x| (f64::from(x) - m).powi(2)).sum::<f64>();
        cov / (var(a, ma) * var(b, mb)).sqrt()
    }

    #[test]
    fn uncorrelated_by_default() {
        let data = gen_synthetic(&SyntheticDataSpec {
            samples: 10_000,
            ..Default::default()
        })
        .unwrap();
        assert!(correlation(&data.labels, &data.protected).abs() < 0.05);
    }

    #[test]
    fn planted_correlation() {
        let data = gen_synthetic(&SyntheticDataSpec {
            samples: 10_000,
            correlation: 0.6,
            ..Default::default()
        })
        .unwrap();
        assert!((correlation(&data.labels, &data.protected) - 0.6).abs() < 0.05);
    }

    #[test]
    fn noiseless_is_separable() {
        let data = gen_synthetic(&SyntheticDataSpec {
            noise: 0.0,
            task_shift: 10.0,
            ..Default::default()
        })
        .unwrap();
        assert!(data
            .features
            .iter()
            .zip(&data.labels)
            .all(|(x, &y)| (x[0] > 0.0) == (y == 1)));
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticDataSpec::default();
        assert_eq!(gen_synthetic(&spec).unwrap(), gen_synthetic(&spec).unwrap());
    }

    #[test]
    fn rejects_bad_correlation() {
        let spec = SyntheticDataSpec {
            correlation: 1.5,
            ..Default::default()
        };
        assert!(gen_synthetic(&spec).is_err());
    }
}
