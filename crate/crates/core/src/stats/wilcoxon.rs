//! Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped (classical handling, not Pratt). Tied
//! absolute differences share their average rank. For up to
//! [`EXACT_MAX_N`] non-zero differences the two-sided p-value is exact: the
//! null distribution of W+ over all 2^n sign patterns is built by
//! convolution on doubled ranks, which are integers even with ties.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_effective: usize,
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_two_sided: f64,
    pub method: WilcoxonMethod,
}

/// Signed mid-ranks of the non-zero differences `x - y`, in input order.
pub fn signed_ranks(differences: &[f64]) -> Vec<f64> {
    let nonzero: Vec<f64> = differences.iter().copied().filter(|&d| d != 0.0).collect();
    let mut order: Vec<usize> = (0..nonzero.len()).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().total_cmp(&nonzero[b].abs()));
    let mut ranks = vec![0.0; nonzero.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && nonzero[order[j]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mid.copysign(nonzero[k]);
        }
        i = j;
    }
    ranks
}

fn doubled(rank: f64) -> u64 {
    (2.0 * rank.abs()).round() as u64
}

/// Exact two-sided p-value `P(min(W+, S - W+) <= w)` where `S` is the rank
/// total and `w` the observed `min(W+, W-)`.
pub fn exact_p_value(ranks: &[f64], statistic: f64) -> f64 {
    let doubled_ranks: Vec<u64> = ranks.iter().map(|&r| doubled(r)).collect();
    let total: u64 = doubled_ranks.iter().sum();
    let w = doubled(statistic);
    // counts[s] = number of sign patterns whose doubled W+ equals s
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in &doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as u64).min(total - s as u64) <= w)
        .map(|(_, &c)| c)
        .sum();
    let p = extreme as f64 / 2f64.powi(ranks.len() as i32);
    p.min(1.0)
}

/// Normal approximation with continuity and tie-variance corrections.
pub fn normal_approx_p_value(ranks: &[f64], statistic: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut abs: Vec<f64> = ranks.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < abs.len() {
        let mut j = i;
        while j < abs.len() && abs[j] == abs[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let deviation = ((statistic - mean).abs() - 0.5).max(0.0);
    let z = deviation / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let differences: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let ranks = signed_ranks(&differences);
    if ranks.is_empty() {
        return Err(StatsError::DegenerateSample);
    }
    let w_plus: f64 = ranks.iter().filter(|&&r| r > 0.0).sum();
    let w_minus: f64 = -ranks.iter().filter(|&&r| r < 0.0).sum::<f64>();
    let statistic = w_plus.min(w_minus);
    let (p_two_sided, method) = if ranks.len() <= EXACT_MAX_N {
        (exact_p_value(&ranks, statistic), WilcoxonMethod::Exact)
    } else {
        (normal_approx_p_value(&ranks, statistic), WilcoxonMethod::NormalApprox)
    };
    Ok(WilcoxonResult {
        n_effective: ranks.len(),
        statistic,
        w_plus,
        w_minus,
        p_two_sided,
        method,
    })
}
