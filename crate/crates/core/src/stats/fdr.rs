use super::StatsError;

/// Benjamini-Hochberg decisions in the caller's original order.
#[derive(Debug, Clone, PartialEq)]
pub struct BhOutcome {
    pub rejected: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Step-up procedure: reject the `k` smallest p-values where `k` is the
/// largest rank with `p_(k) <= k * alpha / m`.
pub fn bh_adjust(p_values: &[f64], alpha: f64) -> Result<BhOutcome, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if let Some(&p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::OutOfRangeP(p));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let mut k = 0;
    for (i, &idx) in order.iter().enumerate() {
        let rank = i + 1;
        if p_values[idx] <= rank as f64 * alpha / m as f64 {
            k = rank;
        }
    }

    let mut rejected = vec![false; m];
    for &idx in &order[..k] {
        rejected[idx] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for (i, &idx) in order.iter().enumerate().rev() {
        let rank = (i + 1) as f64;
        running = running.min(m as f64 * p_values[idx] / rank).min(1.0);
        adjusted[idx] = running;
    }
    Ok(BhOutcome { rejected, adjusted })
}
