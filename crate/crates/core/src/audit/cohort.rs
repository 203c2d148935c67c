use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tasks::task_ids;
use crate::data::{PredictionRecord, Split};

pub const GENDERS: [&str; 2] = ["Male", "Female"];
pub const LANGUAGES: [&str; 2] = ["English", "Spanish"];
pub const ETHNICITIES: [&str; 5] = ["White", "Black", "Hispanic", "Asian", "Other"];
pub const INSURANCES: [&str; 5] = ["Medicare", "Private", "Medicaid", "Self Pay", "Government"];

/// Attribute combinations; every combination gets the same number of patients.
const COMBINATIONS: usize = 2 * 2 * 5 * 5;
/// Test patients per combination: 20 positives then 20 negatives.
const TEST_CELL: usize = 40;
const TEST_POSITIVES: usize = 20;
const TEST_FALSE_POSITIVES: usize = 4;
const BASE_RECALL: f64 = 0.8;
/// Validation patients per combination: 4 positives then 6 negatives.
const VALIDATION_CELL: usize = 10;

const HIGH: f64 = 0.8;
const LOW: f64 = 0.2;

/// A deterministic synthetic test cohort.
///
/// Every attribute combination holds the same patients with the same
/// outcomes, so all subgroup rates are exactly equal except on the planted
/// tasks, where female recall is lowered by `recall_gap`. Test recall is 0.8
/// and specificity 0.8 elsewhere; 2000 test patients per gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    /// The first `tasks` of the standard task list are used.
    pub tasks: usize,
    /// Indices (into the used tasks) with a planted gender recall gap.
    pub planted: Vec<usize>,
    pub recall_gap: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            tasks: 10,
            planted: vec![1, 4, 7],
            recall_gap: 0.3,
        }
    }
}

impl CohortSpec {
    pub fn task_names(&self) -> Vec<String> {
        task_ids().into_iter().take(self.tasks).collect()
    }

    pub fn planted_names(&self) -> Vec<String> {
        let names = self.task_names();
        self.planted.iter().filter_map(|&i| names.get(i).cloned()).collect()
    }
}

fn attributes(combination: usize) -> BTreeMap<String, String> {
    [
        ("gender", GENDERS[combination % 2]),
        ("language", LANGUAGES[(combination / 2) % 2]),
        ("ethnicity", ETHNICITIES[(combination / 4) % 5]),
        ("insurance", INSURANCES[(combination / 20) % 5]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Generate validation records followed by test records, task by task.
pub fn gen_cohort(spec: &CohortSpec) -> Vec<PredictionRecord> {
    let base_tp = (TEST_POSITIVES as f64 * BASE_RECALL).round() as usize;
    let gap_tp = (TEST_POSITIVES as f64 * spec.recall_gap).round() as usize;
    let mut records = Vec::new();
    for (t, task) in spec.task_names().into_iter().enumerate() {
        let planted = spec.planted.contains(&t);
        let record = |patient_id: String, split, label: bool, predicted: bool, combination| PredictionRecord {
            note_id: format!("{patient_id}-n0"),
            patient_id,
            subsequence_index: 0,
            task_id: task.clone(),
            split,
            probability: if predicted { HIGH } else { LOW },
            label: u8::from(label),
            attributes: attributes(combination),
        };
        for i in 0..COMBINATIONS * VALIDATION_CELL {
            let (combination, k) = (i % COMBINATIONS, i / COMBINATIONS);
            let label = k < 4;
            let predicted = k < 3 || k == 4;
            records.push(record(
                format!("V{i:05}"),
                Split::Validation,
                label,
                predicted,
                combination,
            ));
        }
        for i in 0..COMBINATIONS * TEST_CELL {
            let (combination, k) = (i % COMBINATIONS, i / COMBINATIONS);
            let female = combination % 2 == 1;
            let tp = if planted && female {
                base_tp.saturating_sub(gap_tp)
            } else {
                base_tp
            };
            let label = k < TEST_POSITIVES;
            let predicted = if label {
                k < tp
            } else {
                k < TEST_POSITIVES + TEST_FALSE_POSITIVES
            };
            records.push(record(format!("T{i:05}"), Split::Test, label, predicted, combination));
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConfusionCounts, GapKind};

    fn counts(records: &[PredictionRecord], task: &str, gender: &str) -> ConfusionCounts {
        let mut c = ConfusionCounts::default();
        for r in records
            .iter()
            .filter(|r| r.task_id == task && r.split == Split::Test && r.attribute("gender") == Some(gender))
        {
            c.observe(r.probability, r.is_positive(), 0.5);
        }
        c
    }

    #[test]
    fn planted_gap_only_on_planted_tasks() {
        let spec = CohortSpec::default();
        let records = gen_cohort(&spec);
        for (t, task) in spec.task_names().iter().enumerate() {
            let m = counts(&records, task, "Male");
            let f = counts(&records, task, "Female");
            assert_eq!(m.n(), 2000);
            let gap = m.rate(GapKind::Recall).unwrap() - f.rate(GapKind::Recall).unwrap();
            let expected = if spec.planted.contains(&t) { 0.3 } else { 0.0 };
            assert!((gap - expected).abs() < 1e-12, "{task}: {gap}");
            assert_eq!(m.rate(GapKind::Specificity), Some(0.8));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_cohort(&CohortSpec::default()), gen_cohort(&CohortSpec::default()));
    }
}
