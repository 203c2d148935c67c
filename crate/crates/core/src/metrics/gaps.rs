use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ConfusionCounts, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    /// Positive-prediction rate, (TP + FP) / N.
    Parity,
    /// True-positive rate, TP / (TP + FN).
    Recall,
    /// True-negative rate, TN / (TN + FP).
    Specificity,
}

impl GapKind {
    pub const ALL: [GapKind; 3] = [GapKind::Recall, GapKind::Parity, GapKind::Specificity];

    pub fn as_str(self) -> &'static str {
        match self {
            GapKind::Parity => "parity",
            GapKind::Recall => "recall",
            GapKind::Specificity => "specificity",
        }
    }
}

impl fmt::Display for GapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GapKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parity" => Ok(GapKind::Parity),
            "recall" => Ok(GapKind::Recall),
            "specificity" => Ok(GapKind::Specificity),
            other => Err(format!("unknown gap kind `{other}`")),
        }
    }
}

/// Event count `numerator` out of `denominator` members of `group`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRates {
    pub group: String,
    pub numerator: u64,
    pub denominator: u64,
}

impl GroupRates {
    pub fn new(group: impl Into<String>, numerator: u64, denominator: u64) -> Self {
        assert!(numerator <= denominator, "numerator exceeds denominator");
        GroupRates {
            group: group.into(),
            numerator,
            denominator,
        }
    }

    pub fn from_counts(group: impl Into<String>, counts: &ConfusionCounts, kind: GapKind) -> Self {
        let (numerator, denominator) = counts.rate_parts(kind);
        GroupRates::new(group, numerator, denominator)
    }

    pub fn rate(&self) -> Option<f64> {
        (self.denominator > 0).then(|| self.numerator as f64 / self.denominator as f64)
    }
}

/// A signed gap and the group on its advantaged side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapValue {
    pub kind: GapKind,
    pub value: f64,
    pub favored_group: Option<String>,
    /// The comparison group (`i*` in the multi-group case).
    pub reference_group: Option<String>,
}

fn favored(value: f64, first: &str, second: &str) -> Option<String> {
    if value > 0.0 {
        Some(first.to_string())
    } else if value < 0.0 {
        Some(second.to_string())
    } else {
        None
    }
}

/// `rate(g1) - rate(g2)` for the rate selected by `kind`.
pub fn pairwise_gap(
    kind: GapKind,
    g1: (&str, &ConfusionCounts),
    g2: (&str, &ConfusionCounts),
) -> Result<GapValue, MetricError> {
    let undefined = |group: &str| MetricError::UndefinedRate {
        kind,
        group: group.to_string(),
    };
    let r1 = g1.1.rate(kind).ok_or_else(|| undefined(g1.0))?;
    let r2 = g2.1.rate(kind).ok_or_else(|| undefined(g2.0))?;
    let value = r1 - r2;
    Ok(GapValue {
        kind,
        value,
        favored_group: favored(value, g1.0, g2.0),
        reference_group: Some(g2.0.to_string()),
    })
}

/// Gap between group `j` and the group whose rate differs most from it.
///
/// Groups with a zero denominator other than `j` are skipped. Ties in the
/// absolute difference resolve to the earliest group in `rates`.
pub fn multi_group_gap(kind: GapKind, rates: &[GroupRates], j: &str) -> Result<GapValue, MetricError> {
    if rates.len() < 2 {
        return Err(MetricError::TooFewGroups(rates.len()));
    }
    let target = rates
        .iter()
        .find(|r| r.group == j)
        .ok_or_else(|| MetricError::GroupNotFound(j.to_string()))?;
    let undefined = |group: &str| MetricError::UndefinedRate {
        kind,
        group: group.to_string(),
    };
    let rate_j = target.rate().ok_or_else(|| undefined(j))?;

    let mut best: Option<(&GroupRates, f64)> = None;
    for other in rates.iter().filter(|r| r.group != j) {
        let Some(rate_i) = other.rate() else {
            log::warn!("{kind} rate undefined for group `{}`; excluded", other.group);
            continue;
        };
        let diff = rate_j - rate_i;
        if best.is_none_or(|(_, d)| diff.abs() > d.abs()) {
            best = Some((other, diff));
        }
    }
    let (reference, value) =
        best.ok_or_else(|| undefined(rates.iter().find(|r| r.group != j).map_or(j, |r| r.group.as_str())))?;
    Ok(GapValue {
        kind,
        value,
        favored_group: favored(value, j, &reference.group),
        reference_group: Some(reference.group.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts::new(tp, fp, tn, fn_)
    }

    #[test]
    fn recall_gap_by_hand() {
        let g = pairwise_gap(GapKind::Recall, ("A", &counts(9, 0, 0, 1)), ("B", &counts(6, 0, 0, 4))).unwrap();
        assert!((g.value - 0.3).abs() < 1e-12);
        assert_eq!(g.favored_group.as_deref(), Some("A"));
    }

    #[test]
    fn identical_counts_favor_nobody() {
        let c = counts(4, 2, 7, 1);
        for kind in GapKind::ALL {
            let g = pairwise_gap(kind, ("A", &c), ("B", &c)).unwrap();
            assert_eq!(g.value, 0.0);
            assert_eq!(g.favored_group, None);
        }
    }

    #[test]
    fn parity_gap_by_hand() {
        let g = pairwise_gap(GapKind::Parity, ("A", &counts(3, 1, 6, 0)), ("B", &counts(1, 1, 8, 0))).unwrap();
        assert!((g.value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn specificity_gap_favors_second() {
        let g = pairwise_gap(
            GapKind::Specificity,
            ("A", &counts(0, 5, 5, 0)),
            ("B", &counts(0, 1, 9, 0)),
        )
        .unwrap();
        assert!((g.value + 0.4).abs() < 1e-12);
        assert_eq!(g.favored_group.as_deref(), Some("B"));
    }

    #[test]
    fn undefined_recall() {
        let err = pairwise_gap(GapKind::Recall, ("A", &counts(0, 3, 7, 0)), ("B", &counts(1, 0, 0, 1))).unwrap_err();
        assert_eq!(
            err,
            MetricError::UndefinedRate {
                kind: GapKind::Recall,
                group: "A".into()
            }
        );
    }

    fn abc() -> Vec<GroupRates> {
        vec![
            GroupRates::new("A", 5, 10),
            GroupRates::new("B", 2, 10),
            GroupRates::new("C", 4, 10),
        ]
    }

    #[test]
    fn multi_group_for_a() {
        let g = multi_group_gap(GapKind::Parity, &abc(), "A").unwrap();
        assert_eq!(g.reference_group.as_deref(), Some("B"));
        assert!((g.value - 0.3).abs() < 1e-12);
        assert_eq!(g.favored_group.as_deref(), Some("A"));
    }

    #[test]
    fn multi_group_for_c() {
        let g = multi_group_gap(GapKind::Parity, &abc(), "C").unwrap();
        assert_eq!(g.reference_group.as_deref(), Some("B"));
        assert!((g.value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn two_groups_reduce_to_pairwise() {
        let a = counts(7, 2, 10, 3);
        let b = counts(4, 1, 12, 6);
        for kind in GapKind::ALL {
            let rates = [
                GroupRates::from_counts("A", &a, kind),
                GroupRates::from_counts("B", &b, kind),
            ];
            let multi = multi_group_gap(kind, &rates, "A").unwrap();
            let pair = pairwise_gap(kind, ("A", &a), ("B", &b)).unwrap();
            assert_eq!(multi, pair);
        }
    }

    #[test]
    fn zero_denominator_groups_are_skipped() {
        let rates = vec![
            GroupRates::new("A", 5, 10),
            GroupRates::new("B", 0, 0),
            GroupRates::new("C", 4, 10),
        ];
        let g = multi_group_gap(GapKind::Recall, &rates, "A").unwrap();
        assert_eq!(g.reference_group.as_deref(), Some("C"));
        let err = multi_group_gap(GapKind::Recall, &rates, "B").unwrap_err();
        assert!(matches!(err, MetricError::UndefinedRate { .. }));
    }

    #[test]
    fn multi_group_errors() {
        assert_eq!(
            multi_group_gap(GapKind::Parity, &abc(), "Z"),
            Err(MetricError::GroupNotFound("Z".into()))
        );
        assert_eq!(
            multi_group_gap(GapKind::Parity, &abc()[..1], "A"),
            Err(MetricError::TooFewGroups(1))
        );
    }

    #[test]
    fn gap_kind_parses() {
        assert_eq!("Recall".parse::<GapKind>(), Ok(GapKind::Recall));
        assert!("odds".parse::<GapKind>().is_err());
    }
}
