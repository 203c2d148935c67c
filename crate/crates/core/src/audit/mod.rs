//! The audit pipeline: per-task thresholds, bootstrapped subgroup gaps,
//! optional false discovery rate control, and report rendering.

mod cohort;
mod report;
mod tasks;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{GroupPolicy, PredictionRecord, Split, ATTRIBUTES, UNKNOWN};
use crate::metrics::{multi_group_gap, select_threshold_f1, ConfusionCounts, GapKind, GapValue, GroupRates};
use crate::stats::{bh_adjust, bootstrap_weighted, BootstrapConfig, GapEstimate, ResampleUnit, StatsError};

pub use cohort::{gen_cohort, CohortSpec, ETHNICITIES, GENDERS, INSURANCES, LANGUAGES};
pub use report::{
    comparison_label, markdown_table, render_gaps_csv, render_gaps_markdown, render_probe_table,
    render_summary_markdown, summary_rows, ProbeRow, GAP_COLUMNS,
};
pub use tasks::{is_known_task, task_ids, MORTALITY_TASK, PHENOTYPES};

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("no test-split records")]
    NoTestRecords,
    #[error("invalid audit options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditOptions {
    pub attributes: Vec<String>,
    /// Per-attribute policies; attributes without one use
    /// [`GroupPolicy::default_for`].
    pub policies: BTreeMap<String, GroupPolicy>,
    pub gap_kinds: Vec<GapKind>,
    pub bootstrap: BootstrapConfig,
    /// FDR level for the corrected variant.
    pub alpha: f64,
    pub fdr: bool,
    /// Used when a task has no validation records with both classes.
    pub fallback_threshold: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            attributes: ATTRIBUTES.iter().map(|a| a.to_string()).collect(),
            policies: BTreeMap::new(),
            gap_kinds: GapKind::ALL.to_vec(),
            bootstrap: BootstrapConfig::default(),
            alpha: 0.05,
            fdr: true,
            fallback_threshold: 0.5,
        }
    }
}

impl AuditOptions {
    pub fn validate(&self) -> Result<(), AuditError> {
        if self.attributes.is_empty() {
            return Err(AuditError::InvalidOptions("no attributes to audit".into()));
        }
        if self.gap_kinds.is_empty() {
            return Err(AuditError::InvalidOptions("no gap kinds".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AuditError::InvalidOptions(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.fallback_threshold) {
            return Err(AuditError::InvalidOptions("fallback threshold outside [0, 1]".into()));
        }
        self.bootstrap.validate()?;
        for p in self.policies.values() {
            p.validate()?;
        }
        Ok(())
    }

    pub fn policy(&self, attribute: &str) -> GroupPolicy {
        self.policies
            .get(attribute)
            .cloned()
            .unwrap_or_else(|| GroupPolicy::default_for(attribute))
    }
}

/// Benjamini-Hochberg outcome for one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdrDecision {
    pub adjusted_p: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub thresholds: BTreeMap<String, f64>,
    /// Ordered by task, attribute (option order), subgroup, gap kind.
    pub estimates: Vec<GapEstimate>,
    /// Parallel to `estimates` when FDR control ran.
    pub fdr: Option<Vec<FdrDecision>>,
    /// Human-readable notes on comparisons that could not be estimated.
    pub skipped: Vec<String>,
}

impl AuditResult {
    /// Estimates with `significant` replaced by the FDR decision.
    pub fn fdr_estimates(&self) -> Option<Vec<GapEstimate>> {
        let fdr = self.fdr.as_ref()?;
        Some(
            self.estimates
                .iter()
                .zip(fdr)
                .map(|(e, d)| GapEstimate {
                    significant: d.rejected,
                    ..e.clone()
                })
                .collect(),
        )
    }

    /// Subgroups per attribute, in the order they appear in the estimates.
    pub fn subgroups(&self) -> Vec<(String, Vec<String>)> {
        let mut out: Vec<(String, Vec<String>)> = Vec::new();
        for e in &self.estimates {
            match out.iter_mut().find(|(a, _)| *a == e.attribute) {
                Some((_, groups)) => {
                    if !groups.contains(&e.subgroup) {
                        groups.push(e.subgroup.clone());
                    }
                }
                None => out.push((e.attribute.clone(), vec![e.subgroup.clone()])),
            }
        }
        out
    }
}

/// Per-unit confusion counts for each group of one attribute.
struct AttributeUnits {
    attribute: String,
    groups: Vec<String>,
    /// `units[u]` lists (group index, counts) for unit `u`.
    units: Vec<Vec<(usize, ConfusionCounts)>>,
}

impl AttributeUnits {
    fn totals(&self, weights: Option<&[u32]>) -> Vec<ConfusionCounts> {
        let mut totals = vec![ConfusionCounts::default(); self.groups.len()];
        for (u, entries) in self.units.iter().enumerate() {
            let w = weights.map_or(1, |w| w[u]);
            if w == 0 {
                continue;
            }
            for (g, c) in entries {
                totals[*g].add_scaled(c, u64::from(w));
            }
        }
        totals
    }
}

fn task_threshold(records: &[&PredictionRecord], fallback: f64, task: &str) -> f64 {
    let probs: Vec<f64> = records.iter().map(|r| r.probability).collect();
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    match select_threshold_f1(&probs, &labels) {
        Ok((t, _)) => t,
        Err(e) => {
            log::warn!("task `{task}`: no validation threshold ({e}); using {fallback}");
            fallback
        }
    }
}

/// One statistic per (attribute, subgroup, gap kind).
fn gap_statistics(attrs: &[AttributeUnits], kinds: &[GapKind], weights: Option<&[u32]>) -> Vec<Option<GapValue>> {
    let mut out = Vec::new();
    for a in attrs {
        let totals = a.totals(weights);
        for j in &a.groups {
            for &kind in kinds {
                let rates: Vec<GroupRates> = a
                    .groups
                    .iter()
                    .zip(&totals)
                    .map(|(g, c)| GroupRates::from_counts(g.clone(), c, kind))
                    .collect();
                out.push(multi_group_gap(kind, &rates, j).ok());
            }
        }
    }
    out
}

/// Bootstrap every (attribute, subgroup, gap kind) gap of every task.
///
/// Thresholds come from the validation split (best F1); gaps are computed
/// on the test split. Each task is one bootstrap stream, so all of its
/// comparisons share the same resamples.
pub fn run_audit(records: &[PredictionRecord], options: &AuditOptions) -> Result<AuditResult, AuditError> {
    options.validate()?;
    if !records.iter().any(|r| r.split == Split::Test) {
        return Err(AuditError::NoTestRecords);
    }
    let mut by_task: BTreeMap<&str, (Vec<&PredictionRecord>, Vec<&PredictionRecord>)> = BTreeMap::new();
    for r in records {
        let entry = by_task.entry(r.task_id.as_str()).or_default();
        match r.split {
            Split::Validation => entry.0.push(r),
            Split::Test => entry.1.push(r),
            Split::Train => {}
        }
    }
    let policies: Vec<GroupPolicy> = options.attributes.iter().map(|a| options.policy(a)).collect();

    let mut result = AuditResult {
        thresholds: BTreeMap::new(),
        estimates: Vec::new(),
        fdr: None,
        skipped: Vec::new(),
    };
    for (stream, (task, (validation, test))) in by_task.into_iter().enumerate() {
        if test.is_empty() {
            result.skipped.push(format!("{task}: no test records"));
            continue;
        }
        if !is_known_task(task) {
            log::warn!("task `{task}` is not one of the standard task ids");
        }
        let threshold = task_threshold(&validation, options.fallback_threshold, task);
        result.thresholds.insert(task.to_string(), threshold);

        // Resampling units: patients, or single records.
        let mut unit_of: HashMap<&str, usize> = HashMap::new();
        let unit_index: Vec<usize> = test
            .iter()
            .enumerate()
            .map(|(i, r)| match options.bootstrap.resample_unit {
                ResampleUnit::Record => i,
                ResampleUnit::Patient => {
                    let next = unit_of.len();
                    *unit_of.entry(r.patient_id.as_str()).or_insert(next)
                }
            })
            .collect();
        let n_units = match options.bootstrap.resample_unit {
            ResampleUnit::Record => test.len(),
            ResampleUnit::Patient => unit_of.len(),
        };

        let mut attrs = Vec::new();
        for policy in &policies {
            let mapped: Vec<Option<&str>> = test
                .iter()
                .map(|r| policy.map_value(r.attribute(&policy.attribute).unwrap_or(UNKNOWN)))
                .collect();
            let groups: Vec<String> = mapped
                .iter()
                .flatten()
                .map(|g| g.to_string())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if groups.len() < 2 {
                result
                    .skipped
                    .push(format!("{task}/{}: fewer than two groups", policy.attribute));
                continue;
            }
            let mut units: Vec<Vec<(usize, ConfusionCounts)>> = vec![Vec::new(); n_units];
            for ((r, g), &u) in test.iter().zip(&mapped).zip(&unit_index) {
                let Some(g) = g else { continue };
                let gi = groups
                    .binary_search_by(|x| x.as_str().cmp(g))
                    .expect("group collected above");
                let slot = match units[u].iter_mut().find(|(i, _)| *i == gi) {
                    Some(slot) => slot,
                    None => {
                        units[u].push((gi, ConfusionCounts::default()));
                        units[u].last_mut().expect("just pushed")
                    }
                };
                slot.1.observe(r.probability, r.is_positive(), threshold);
            }
            attrs.push(AttributeUnits {
                attribute: policy.attribute.clone(),
                groups,
                units,
            });
        }

        let kinds = &options.gap_kinds;
        let points = gap_statistics(&attrs, kinds, None);
        let sets = bootstrap_weighted(n_units, points.len(), &options.bootstrap, stream as u64, |w| {
            gap_statistics(&attrs, kinds, Some(w))
                .into_iter()
                .map(|s| s.map(|g| g.value))
                .collect()
        })?;

        let labels = attrs
            .iter()
            .flat_map(|a| a.groups.iter().flat_map(move |g| kinds.iter().map(move |k| (a, g, *k))));
        for ((point, set), (a, group, kind)) in points.into_iter().zip(&sets).zip(labels) {
            let Some(point) = point else {
                result
                    .skipped
                    .push(format!("{task}/{}/{group}/{kind}: gap undefined", a.attribute));
                continue;
            };
            match crate::stats::estimate_from_replicates(point, set, &options.bootstrap) {
                Ok(e) => result.estimates.push(e.with_labels(task, &a.attribute, group)),
                Err(e) => result
                    .skipped
                    .push(format!("{task}/{}/{group}/{kind}: {e}", a.attribute)),
            }
        }
    }

    // Reorder to follow the option order of attributes rather than map order.
    let rank: HashMap<&str, usize> = options
        .attributes
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let kind_rank = |k: GapKind| options.gap_kinds.iter().position(|&x| x == k).unwrap_or(usize::MAX);
    result.estimates.sort_by(|a, b| {
        (
            a.task_id.as_str(),
            rank[a.attribute.as_str()],
            a.subgroup.as_str(),
            kind_rank(a.point.kind),
        )
            .cmp(&(
                b.task_id.as_str(),
                rank[b.attribute.as_str()],
                b.subgroup.as_str(),
                kind_rank(b.point.kind),
            ))
    });

    if options.fdr {
        result.fdr = Some(fdr_decisions(&result.estimates, options.alpha)?);
    }
    Ok(result)
}

/// Benjamini-Hochberg within each (attribute, subgroup, gap kind) family
/// across tasks, on the bootstrap sign p-values.
pub fn fdr_decisions(estimates: &[GapEstimate], alpha: f64) -> Result<Vec<FdrDecision>, AuditError> {
    let mut families: BTreeMap<(&str, &str, GapKind), Vec<usize>> = BTreeMap::new();
    for (i, e) in estimates.iter().enumerate() {
        families
            .entry((e.attribute.as_str(), e.subgroup.as_str(), e.point.kind))
            .or_default()
            .push(i);
    }
    let mut out = vec![
        FdrDecision {
            adjusted_p: 1.0,
            rejected: false,
        };
        estimates.len()
    ];
    for members in families.values() {
        let p: Vec<f64> = members.iter().map(|&i| estimates[i].p_value.unwrap_or(1.0)).collect();
        let bh = bh_adjust(&p, alpha)?;
        for (k, &i) in members.iter().enumerate() {
            out[i] = FdrDecision {
                adjusted_p: bh.adjusted[k],
                rejected: bh.rejected[k],
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_options() -> AuditOptions {
        AuditOptions {
            bootstrap: BootstrapConfig {
                replicates: 200,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn cohort_flags_only_planted_gender_recall() {
        let spec = CohortSpec {
            tasks: 4,
            planted: vec![2],
            recall_gap: 0.3,
        };
        let records = gen_cohort(&spec);
        let result = run_audit(&records, &small_options()).unwrap();
        assert!(result.skipped.is_empty(), "{:?}", result.skipped);
        assert!(result.thresholds.values().all(|&t| t == 0.8));
        let flagged: BTreeSet<&str> = result
            .estimates
            .iter()
            .filter(|e| e.significant && e.attribute == "gender" && e.point.kind == GapKind::Recall)
            .map(|e| e.task_id.as_str())
            .collect();
        assert_eq!(flagged, spec.planted_names().iter().map(String::as_str).collect());
        let fdr = result.fdr_estimates().unwrap();
        assert!(fdr
            .iter()
            .filter(|e| e.significant)
            .all(|e| e.attribute == "gender" && spec.planted_names().contains(&e.task_id)));
    }

    #[test]
    fn insurance_policy_drops_small_groups() {
        let records = gen_cohort(&CohortSpec {
            tasks: 1,
            planted: vec![],
            recall_gap: 0.0,
        });
        let result = run_audit(&records, &small_options()).unwrap();
        let groups: BTreeSet<&str> = result
            .estimates
            .iter()
            .filter(|e| e.attribute == "insurance")
            .map(|e| e.subgroup.as_str())
            .collect();
        assert_eq!(groups, ["Medicaid", "Medicare", "Private"].into());
        assert!(result.estimates.iter().all(|e| !e.significant));
    }

    #[test]
    fn needs_test_records() {
        let mut records = gen_cohort(&CohortSpec {
            tasks: 1,
            planted: vec![],
            recall_gap: 0.0,
        });
        records.retain(|r| r.split != Split::Test);
        assert!(matches!(
            run_audit(&records, &small_options()),
            Err(AuditError::NoTestRecords)
        ));
    }
}
