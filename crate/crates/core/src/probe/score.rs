use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::oracle::{Oracle, OracleQuery, ScoringMode, Target};
use super::template::{expand_templates, GenderSide, PlannedProbe, TemplateSpec};
use super::ProbeError;
use crate::stats::{wilcoxon_signed_rank, WilcoxonResult};

/// How the prior probability is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    /// Attribute filled, target masked.
    #[default]
    Literal,
    /// Attribute and target both masked.
    BothMaskedPrior,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub mode: ProbeMode,
    /// Ask for all target words of a (template, filler) in one prior query
    /// instead of one prior query per word. Scores are unchanged.
    pub batch_priors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub template_index: usize,
    pub attribute_index: usize,
    pub attribute: String,
    pub word: String,
    pub side: GenderSide,
    pub log_p_prior: f64,
    pub log_p_target: f64,
    /// `log_p_target - log_p_prior`.
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeScores {
    pub male: Vec<ScoreSample>,
    pub female: Vec<ScoreSample>,
}

impl ProbeScores {
    pub fn side(&self, side: GenderSide) -> &[ScoreSample] {
        match side {
            GenderSide::Male => &self.male,
            GenderSide::Female => &self.female,
        }
    }

    pub fn len(&self) -> usize {
        self.male.len() + self.female.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn prior_query(id: u64, plan: &PlannedProbe, mode: ProbeMode, candidates: Vec<String>) -> OracleQuery {
    let (text, mask_index) = match mode {
        ProbeMode::Literal => (plan.prior_text.clone(), plan.target_index),
        ProbeMode::BothMaskedPrior => (plan.prior_text_attribute_masked.clone(), plan.attribute_masked_index),
    };
    OracleQuery {
        id,
        text,
        candidates,
        scoring_mode: ScoringMode::Masked,
        target: Target { mask_index },
    }
}

fn target_query(id: u64, plan: &PlannedProbe) -> OracleQuery {
    OracleQuery {
        id,
        text: plan.target_text.clone(),
        candidates: vec![plan.word.clone()],
        scoring_mode: ScoringMode::PseudoLikelihood,
        target: Target {
            mask_index: plan.target_index,
        },
    }
}

/// Score every planned probe as `log p_target - log p_prior`.
///
/// Without `batch_priors` this issues exactly two queries per plan: a masked
/// prior query and a pseudo-likelihood query on the realized text.
pub fn calc_log_score<O: Oracle + ?Sized>(
    spec: &TemplateSpec,
    oracle: &mut O,
    options: &ProbeOptions,
) -> Result<ProbeScores, ProbeError> {
    let plans = expand_templates(spec)?;
    let mut queries = Vec::with_capacity(2 * plans.len());
    // Per plan: index of its prior query and of its target query.
    let mut slots = Vec::with_capacity(plans.len());
    let mut batched: BTreeMap<(usize, usize), usize> = BTreeMap::new();

    for plan in &plans {
        let prior = if options.batch_priors {
            *batched
                .entry((plan.template_index, plan.attribute_index))
                .or_insert_with(|| {
                    let mut words = spec.male_words.clone();
                    words.extend(spec.female_words.iter().cloned());
                    queries.push(prior_query(queries.len() as u64, plan, options.mode, words));
                    queries.len() - 1
                })
        } else {
            queries.push(prior_query(
                queries.len() as u64,
                plan,
                options.mode,
                vec![plan.word.clone()],
            ));
            queries.len() - 1
        };
        queries.push(target_query(queries.len() as u64, plan));
        slots.push((prior, queries.len() - 1));
    }

    let responses = oracle.query_batch(&queries)?;
    let mut scores = ProbeScores::default();
    for (plan, (prior, target)) in plans.into_iter().zip(slots) {
        let log_p_prior = responses[prior].log_probs[&plan.word];
        let log_p_target = responses[target].log_probs[&plan.word];
        let score = log_p_target - log_p_prior;
        if !score.is_finite() {
            return Err(ProbeError::NonFiniteScore {
                template: plan.template_index,
                word: plan.word,
            });
        }
        let sample = ScoreSample {
            template_index: plan.template_index,
            attribute_index: plan.attribute_index,
            attribute: plan.attribute,
            word: plan.word,
            side: plan.side,
            log_p_prior,
            log_p_target,
            score,
        };
        match plan.side {
            GenderSide::Male => scores.male.push(sample),
            GenderSide::Female => scores.female.push(sample),
        }
    }
    Ok(scores)
}

/// Male/female comparison for one topic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeComparison {
    pub mean_male: f64,
    pub mean_female: f64,
    /// Per-(template, filler) mean score of each side, in template order.
    pub paired_male: Vec<f64>,
    pub paired_female: Vec<f64>,
    pub test: WilcoxonResult,
    pub alpha: f64,
    pub significant: bool,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn paired_means(samples: &[ScoreSample]) -> BTreeMap<(usize, usize), f64> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for s in samples {
        groups
            .entry((s.template_index, s.attribute_index))
            .or_default()
            .push(s.score);
    }
    groups.into_iter().map(|(k, v)| (k, mean(v.into_iter()))).collect()
}

/// Pair the sides per (template, filler) by averaging over each side's word
/// set, then run a Wilcoxon signed-rank test on the pairs.
pub fn compare_gender_scores(scores: &ProbeScores, alpha: f64) -> Result<ProbeComparison, ProbeError> {
    let male = paired_means(&scores.male);
    let female = paired_means(&scores.female);
    if male.keys().ne(female.keys()) {
        return Err(ProbeError::InvalidSpec(
            "male and female samples cover different (template, filler) pairs".into(),
        ));
    }
    let paired_male: Vec<f64> = male.into_values().collect();
    let paired_female: Vec<f64> = female.into_values().collect();
    let test = wilcoxon_signed_rank(&paired_male, &paired_female)?;
    Ok(ProbeComparison {
        mean_male: mean(scores.male.iter().map(|s| s.score)),
        mean_female: mean(scores.female.iter().map(|s| s.score)),
        significant: test.p_two_sided < alpha,
        paired_male,
        paired_female,
        test,
        alpha,
    })
}

/// Three decimals with a trailing `*` when significant, e.g. `0.616*`.
pub fn format_score(value: f64, significant: bool) -> String {
    format!("{value:.3}{}", if significant { "*" } else { "" })
}
