//! Percentile bootstrap with per-replicate seed streams.
//!
//! Replicate `b` draws from a generator seeded by `(master_seed, stream, b)`
//! only, so results do not depend on execution order or thread count.

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GapEstimate, StatsError};
use crate::metrics::GapValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleUnit {
    Record,
    Patient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub master_seed: u64,
    pub resample_unit: ResampleUnit,
    pub parallel: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            level: 0.95,
            master_seed: 0,
            resample_unit: ResampleUnit::Patient,
            parallel: true,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.replicates == 0 {
            return Err(StatsError::InvalidConfig("replicates must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(StatsError::InvalidConfig(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replicate_seed(master_seed: u64, stream: u64, replicate: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ stream) ^ replicate as u64)
}

/// How many times each of `n_units` units is drawn in one replicate.
pub fn replicate_weights(n_units: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0u32; n_units];
    for _ in 0..n_units {
        weights[rng.random_range(0..n_units)] += 1;
    }
    weights
}

/// Valid replicate values of one statistic, plus the number discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub values: Vec<f64>,
    pub discarded: usize,
}

/// Run `config.replicates` resamples over `n_units` units. `statistic` maps
/// unit multiplicities to several statistics at once; `None` marks a
/// statistic undefined on that resample.
pub fn bootstrap_weighted<F>(
    n_units: usize,
    n_statistics: usize,
    config: &BootstrapConfig,
    stream: u64,
    statistic: F,
) -> Result<Vec<ReplicateSet>, StatsError>
where
    F: Fn(&[u32]) -> Vec<Option<f64>> + Sync,
{
    config.validate()?;
    if n_units == 0 {
        return Err(StatsError::EmptyInput);
    }
    let run = |b: usize| {
        let weights = replicate_weights(n_units, replicate_seed(config.master_seed, stream, b));
        let out = statistic(&weights);
        debug_assert_eq!(out.len(), n_statistics);
        out
    };
    let per_replicate: Vec<Vec<Option<f64>>> = if config.parallel {
        (0..config.replicates).into_par_iter().map(run).collect()
    } else {
        (0..config.replicates).map(run).collect()
    };

    let mut sets = vec![
        ReplicateSet {
            values: Vec::with_capacity(config.replicates),
            discarded: 0,
        };
        n_statistics
    ];
    for replicate in per_replicate {
        for (set, value) in sets.iter_mut().zip(replicate) {
            match value {
                Some(v) if v.is_finite() => set.values.push(v),
                _ => set.discarded += 1,
            }
        }
    }
    Ok(sets)
}

/// Nearest-rank (type 1) percentile interval over the replicate values.
pub fn percentile_ci(values: &[f64], level: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let alpha = (1.0 - level) / 2.0;
    let rank = |q: f64| {
        // Guard against q*m landing a hair above an integer, e.g. 0.025*1000.
        let r = (q * m as f64 - 1e-9).ceil() as usize;
        r.clamp(1, m) - 1
    };
    Some((sorted[rank(alpha)], sorted[rank(1.0 - alpha)]))
}

/// Two-sided p-value `2 * min(P(v <= 0), P(v >= 0))` over replicates, capped at 1.
pub fn sign_p_value(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let m = values.len() as f64;
    let le = values.iter().filter(|&&v| v <= 0.0).count() as f64 / m;
    let ge = values.iter().filter(|&&v| v >= 0.0).count() as f64 / m;
    Some((2.0 * le.min(ge)).min(1.0))
}

pub(crate) fn estimate_from_replicates(
    point: GapValue,
    set: &ReplicateSet,
    config: &BootstrapConfig,
) -> Result<GapEstimate, StatsError> {
    let total = set.values.len() + set.discarded;
    if set.discarded * 2 > total {
        return Err(StatsError::TooManyDegenerateReplicates {
            discarded: set.discarded,
            total,
        });
    }
    let (ci_low, ci_high) =
        percentile_ci(&set.values, config.level).ok_or(StatsError::TooManyDegenerateReplicates {
            discarded: set.discarded,
            total,
        })?;
    let mut estimate = GapEstimate {
        task_id: String::new(),
        attribute: String::new(),
        subgroup: String::new(),
        point,
        ci_low,
        ci_high,
        significant: false,
        p_value: sign_p_value(&set.values),
        replicates_used: set.values.len(),
        replicates_discarded: set.discarded,
    };
    estimate.significant = estimate.ci_excludes_zero();
    Ok(estimate)
}

/// Bootstrap a gap statistic over records grouped into resampling units.
///
/// `unit_key` identifies a record's patient (ignored when resampling by
/// record). `statistic` returns `None` when the gap is undefined on a
/// resample, e.g. when a group is absent.
pub fn bootstrap_gap<R, K, U, S>(
    records: &[R],
    unit_key: U,
    statistic: S,
    config: &BootstrapConfig,
) -> Result<GapEstimate, StatsError>
where
    R: Sync,
    K: Hash + Eq,
    U: Fn(&R) -> K,
    S: Fn(&[&R]) -> Option<GapValue> + Sync,
{
    if records.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let all: Vec<&R> = records.iter().collect();
    let point = statistic(&all).ok_or(StatsError::UndefinedStatistic)?;

    let units: Vec<Vec<&R>> = match config.resample_unit {
        ResampleUnit::Record => records.iter().map(|r| vec![r]).collect(),
        ResampleUnit::Patient => {
            let mut index: HashMap<K, usize> = HashMap::new();
            let mut units: Vec<Vec<&R>> = Vec::new();
            for r in records {
                let next = units.len();
                let slot = *index.entry(unit_key(r)).or_insert(next);
                if slot == next {
                    units.push(Vec::new());
                }
                units[slot].push(r);
            }
            units
        }
    };

    let sets = bootstrap_weighted(units.len(), 1, config, 0, |weights| {
        let mut sample: Vec<&R> = Vec::with_capacity(records.len());
        for (unit, &w) in units.iter().zip(weights) {
            for _ in 0..w {
                sample.extend_from_slice(unit);
            }
        }
        vec![statistic(&sample).map(|g| g.value)]
    })?;
    estimate_from_replicates(point, &sets[0], config)
}
