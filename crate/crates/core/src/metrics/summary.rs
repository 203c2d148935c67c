use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::GapKind;
use crate::stats::GapEstimate;

/// Count of significant tasks and how many of them favor the subgroup.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SummaryCell {
    pub significant: usize,
    pub favoring: usize,
}

impl SummaryCell {
    pub fn percent_favoring(&self) -> f64 {
        if self.significant == 0 {
            0.0
        } else {
            100.0 * self.favoring as f64 / self.significant as f64
        }
    }
}

impl fmt::Display for SummaryCell {
    /// Renders as `N (P%)`, with the percentage rounded to an integer.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:.0}%)", self.significant, self.percent_favoring())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub attribute: String,
    pub subgroup: String,
    pub cells: BTreeMap<GapKind, SummaryCell>,
}

impl GapSummary {
    pub fn cell(&self, kind: GapKind) -> SummaryCell {
        self.cells.get(&kind).copied().unwrap_or_default()
    }
}

/// Tally significant gaps for one (attribute, subgroup) across tasks.
pub fn summarize_gaps(estimates: &[GapEstimate], attribute: &str, subgroup: &str) -> GapSummary {
    let mut cells: BTreeMap<GapKind, SummaryCell> = GapKind::ALL.iter().map(|&k| (k, SummaryCell::default())).collect();
    for e in estimates
        .iter()
        .filter(|e| e.significant && e.attribute == attribute && e.subgroup == subgroup)
    {
        let cell = cells.entry(e.point.kind).or_default();
        cell.significant += 1;
        if e.point.favored_group.as_deref() == Some(subgroup) {
            cell.favoring += 1;
        }
    }
    GapSummary {
        attribute: attribute.to_string(),
        subgroup: subgroup.to_string(),
        cells,
    }
}
