use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::data::NoteDocument;

/// Gender split of label-positive patients among notes that mention an
/// attribute string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenderRatio {
    pub matching_notes: usize,
    pub positive_patients: usize,
    /// `None` when no matching patient is label-positive.
    pub male_pct: Option<f64>,
    pub female_pct: Option<f64>,
}

impl fmt::Display for GenderRatio {
    /// `64.6%, 35.4%`, or `n/a` when undefined.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.male_pct, self.female_pct) {
            (Some(m), Some(w)) => write!(f, "{m:.1}%, {w:.1}%"),
            _ => f.write_str("n/a"),
        }
    }
}

fn side(gender: &str) -> Option<bool> {
    match gender.trim().to_ascii_lowercase().as_str() {
        "m" | "male" => Some(true),
        "f" | "female" => Some(false),
        _ => None,
    }
}

/// Count discharge summaries containing any of `attribute_strings`
/// (case-insensitive substring) and split the label-positive patients behind
/// them by gender. Patients with a gender other than male/female are skipped.
pub fn corpus_gender_ratio(
    notes: &[NoteDocument],
    attribute_strings: &[String],
    patient_genders: &BTreeMap<String, String>,
    patient_labels: &BTreeMap<String, bool>,
) -> GenderRatio {
    let needles: Vec<String> = attribute_strings.iter().map(|s| s.to_lowercase()).collect();
    let mut matching_notes = 0;
    let mut patients = BTreeSet::new();
    for note in notes.iter().filter(|n| n.is_discharge_summary()) {
        let text = note.text.to_lowercase();
        if needles.iter().any(|n| text.contains(n.as_str())) {
            matching_notes += 1;
            patients.insert(note.patient_id.as_str());
        }
    }

    let (mut male, mut female) = (0usize, 0usize);
    for p in patients {
        if patient_labels.get(p).copied() != Some(true) {
            continue;
        }
        match patient_genders.get(p).and_then(|g| side(g)) {
            Some(true) => male += 1,
            Some(false) => female += 1,
            None => log::warn!("patient {p} has no binary gender; skipped in ratio"),
        }
    }
    let total = male + female;
    let pct = |c: usize| (total > 0).then(|| 100.0 * c as f64 / total as f64);
    GenderRatio {
        matching_notes,
        positive_patients: total,
        male_pct: pct(male),
        female_pct: pct(female),
    }
}
