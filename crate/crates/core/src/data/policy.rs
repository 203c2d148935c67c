use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DataError, PredictionRecord, UNKNOWN};

/// How subgroup values of one attribute are dropped or merged before analysis.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPolicy {
    pub attribute: String,
    #[serde(default)]
    pub drop_values: BTreeSet<String>,
    #[serde(default)]
    pub collapse_map: BTreeMap<String, String>,
    /// When set, every value that is neither dropped, collapsed nor listed in
    /// `keep` is mapped to this value (e.g. all non-English languages to `Other`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse_rest_to: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub keep: BTreeSet<String>,
}

impl GroupPolicy {
    pub fn identity(attribute: impl Into<String>) -> Self {
        GroupPolicy {
            attribute: attribute.into(),
            ..Default::default()
        }
    }

    pub fn dropping<I, S>(attribute: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        GroupPolicy {
            attribute: attribute.into(),
            drop_values: values.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    /// Default analysis policy for each of the four audited attributes.
    pub fn default_for(attribute: &str) -> Self {
        match attribute {
            "gender" => GroupPolicy::dropping("gender", [UNKNOWN]),
            "language" => GroupPolicy {
                keep: ["English".to_string()].into(),
                collapse_rest_to: Some("Other".into()),
                ..GroupPolicy::dropping("language", [UNKNOWN])
            },
            "ethnicity" => GroupPolicy::dropping("ethnicity", [UNKNOWN]),
            "insurance" => GroupPolicy::dropping("insurance", [UNKNOWN, "Self Pay", "Government"]),
            other => GroupPolicy::identity(other),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.collapse_map.keys().any(|k| self.drop_values.contains(k)) {
            return Err(DataError::InvalidPolicy(self.attribute.clone()));
        }
        Ok(())
    }

    /// The analysis value for `value`, or `None` if the record is dropped.
    pub fn map_value<'a>(&'a self, value: &'a str) -> Option<&'a str> {
        if self.drop_values.contains(value) {
            return None;
        }
        if let Some(target) = self.collapse_map.get(value) {
            return Some(target);
        }
        match &self.collapse_rest_to {
            Some(rest) if !self.keep.contains(value) => Some(rest),
            _ => Some(value),
        }
    }
}

/// Apply `policy` to its attribute; other attributes are left untouched.
pub fn filter_groups(records: &[PredictionRecord], policy: &GroupPolicy) -> Result<Vec<PredictionRecord>, DataError> {
    policy.validate()?;
    if !records.is_empty() && !records.iter().any(|r| r.attributes.contains_key(&policy.attribute)) {
        return Err(DataError::UnknownAttribute(policy.attribute.clone()));
    }
    Ok(records
        .iter()
        .filter_map(|r| {
            let value = r.attribute(&policy.attribute).unwrap_or(UNKNOWN);
            let mapped = policy.map_value(value)?;
            let mut out = r.clone();
            if mapped != value {
                out.attributes.insert(policy.attribute.clone(), mapped.to_string());
            }
            Some(out)
        })
        .collect())
}
