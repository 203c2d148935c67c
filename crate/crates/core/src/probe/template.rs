use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{token_index_at, ProbeError};

pub const ATTRIBUTE_MARKER: &str = "[ATTR]";
pub const TARGET_MARKER: &str = "[TGT]";
/// Accepted in place of [`TARGET_MARKER`].
pub const TARGET_ALIAS: &str = "[GEND]";
pub const MASK: &str = "[MASK]";

/// Probe templates for one topic. Each template holds one attribute slot and
/// one target slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub topic: String,
    pub templates: Vec<String>,
    pub attributes: Vec<String>,
    pub male_words: Vec<String>,
    pub female_words: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderSide {
    Male,
    Female,
}

impl fmt::Display for GenderSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenderSide::Male => "male",
            GenderSide::Female => "female",
        })
    }
}

/// One (template, attribute filler, target word) combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedProbe {
    pub template_index: usize,
    pub attribute_index: usize,
    pub attribute: String,
    pub side: GenderSide,
    pub word: String,
    /// Template with the attribute filled and the target slot masked.
    pub prior_text: String,
    /// Template with both the attribute and the target slot masked.
    pub prior_text_attribute_masked: String,
    /// Token index of the target slot in `prior_text_attribute_masked`.
    pub attribute_masked_index: usize,
    /// Template with the attribute filled and `word` in the target slot.
    pub target_text: String,
    /// Whitespace-token index of the target slot in `prior_text` and `target_text`.
    pub target_index: usize,
}

impl TemplateSpec {
    pub fn load(path: &Path) -> Result<Self, ProbeError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProbeError::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ProbeError::Json {
            context: format!("parsing {}", path.display()),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.templates.is_empty() {
            return Err(ProbeError::InvalidSpec("no templates".into()));
        }
        for (name, set) in [
            ("attributes", &self.attributes),
            ("male_words", &self.male_words),
            ("female_words", &self.female_words),
        ] {
            if set.is_empty() {
                return Err(ProbeError::InvalidSpec(format!("`{name}` is empty")));
            }
        }
        let male: BTreeSet<&str> = self.male_words.iter().map(String::as_str).collect();
        if let Some(w) = self.female_words.iter().find(|w| male.contains(w.as_str())) {
            return Err(ProbeError::InvalidSpec(format!(
                "`{w}` is listed as both a male and a female word"
            )));
        }
        for (index, t) in self.templates.iter().enumerate() {
            check_markers(index, t)?;
        }
        Ok(())
    }

    /// The planned sample count `|T| * |W_a| * (|W_m| + |W_f|)`.
    pub fn sample_count(&self) -> usize {
        self.templates.len() * self.attributes.len() * (self.male_words.len() + self.female_words.len())
    }

    pub fn words(&self, side: GenderSide) -> &[String] {
        match side {
            GenderSide::Male => &self.male_words,
            GenderSide::Female => &self.female_words,
        }
    }
}

fn check_markers(index: usize, template: &str) -> Result<(), ProbeError> {
    let attrs = template.matches(ATTRIBUTE_MARKER).count();
    let targets = template.matches(TARGET_MARKER).count() + template.matches(TARGET_ALIAS).count();
    if attrs != 1 || targets != 1 {
        return Err(ProbeError::BadTemplate {
            index,
            reason: format!("expected one attribute and one target marker, found {attrs} and {targets}"),
        });
    }
    Ok(())
}

fn target_marker(template: &str) -> &'static str {
    if template.contains(TARGET_MARKER) {
        TARGET_MARKER
    } else {
        TARGET_ALIAS
    }
}

/// Fill both slots; returns the text and the token index of the target slot.
fn realize(template: &str, attribute: &str, target: &str) -> (String, usize) {
    let normalized = template.split_whitespace().collect::<Vec<_>>().join(" ");
    let with_attr = normalized.replacen(ATTRIBUTE_MARKER, attribute, 1);
    let marker = target_marker(&with_attr);
    let offset = with_attr.find(marker).expect("target marker checked");
    let index = token_index_at(&with_attr, offset);
    (with_attr.replacen(marker, target, 1), index)
}

/// Expand a spec into every planned probe, in template, filler, side, word order.
pub fn expand_templates(spec: &TemplateSpec) -> Result<Vec<PlannedProbe>, ProbeError> {
    spec.validate()?;
    let mut plans = Vec::with_capacity(spec.sample_count());
    for (template_index, template) in spec.templates.iter().enumerate() {
        let (prior_text_attribute_masked, attribute_masked_index) = realize(template, MASK, MASK);
        for (attribute_index, attribute) in spec.attributes.iter().enumerate() {
            let (prior_text, target_index) = realize(template, attribute, MASK);
            for side in [GenderSide::Male, GenderSide::Female] {
                for word in spec.words(side) {
                    let (target_text, _) = realize(template, attribute, word);
                    plans.push(PlannedProbe {
                        template_index,
                        attribute_index,
                        attribute: attribute.clone(),
                        side,
                        word: word.clone(),
                        prior_text: prior_text.clone(),
                        prior_text_attribute_masked: prior_text_attribute_masked.clone(),
                        attribute_masked_index,
                        target_text,
                        target_index,
                    });
                }
            }
        }
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> TemplateSpec {
        TemplateSpec {
            topic: "HIV".into(),
            templates: vec![
                "[GEND] has a pmh of [ATTR]".into(),
                "this is a 50 yo [TGT] with a hx of [ATTR]".into(),
            ],
            attributes: vec!["hiv".into(), "aids".into(), "hiv infection".into()],
            male_words: vec!["he".into(), "man".into()],
            female_words: vec!["she".into(), "woman".into()],
        }
    }

    #[test]
    fn plan_count_is_product() {
        let plans = expand_templates(&spec()).unwrap();
        assert_eq!(plans.len(), 24);
        assert_eq!(spec().sample_count(), 24);
    }

    #[test]
    fn texts_are_realized() {
        let plans = expand_templates(&spec()).unwrap();
        let p = &plans[0];
        assert_eq!(p.prior_text, "[MASK] has a pmh of hiv");
        assert_eq!(p.target_text, "he has a pmh of hiv");
        assert_eq!(p.target_index, 0);
        assert_eq!(p.prior_text_attribute_masked, "[MASK] has a pmh of [MASK]");
        let q = plans
            .iter()
            .find(|p| p.template_index == 1 && p.attribute == "hiv infection")
            .unwrap();
        assert_eq!(q.prior_text, "this is a 50 yo [MASK] with a hx of hiv infection");
        assert_eq!(q.target_index, 5);
    }

    #[test]
    fn attribute_before_target_shifts_index() {
        let mut s = spec();
        s.templates = vec!["pt with [ATTR] is a [TGT]".into()];
        let plans = expand_templates(&s).unwrap();
        let multi = plans.iter().find(|p| p.attribute == "hiv infection").unwrap();
        assert_eq!(multi.target_index, 6);
        assert_eq!(multi.prior_text.split_whitespace().nth(6), Some(MASK));
        assert_eq!(multi.attribute_masked_index, 5);
    }

    #[test]
    fn missing_target_marker() {
        let mut s = spec();
        s.templates.push("pt has [ATTR]".into());
        assert!(matches!(
            expand_templates(&s),
            Err(ProbeError::BadTemplate { index: 2, .. })
        ));
    }

    #[test]
    fn duplicate_marker() {
        let mut s = spec();
        s.templates = vec!["[TGT] [TGT] has [ATTR]".into()];
        assert!(matches!(
            expand_templates(&s),
            Err(ProbeError::BadTemplate { index: 0, .. })
        ));
    }

    #[test]
    fn overlapping_word_sets() {
        let mut s = spec();
        s.female_words.push("he".into());
        assert!(matches!(expand_templates(&s), Err(ProbeError::InvalidSpec(_))));
    }
}
