use std::cmp::Ordering;

use serde::Serialize;

use super::oracle::{Oracle, OracleQuery, ScoringMode, Target};
use super::template::MASK;
use super::ProbeError;

/// Words filling the masks left to right, with their summed log-probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completion {
    pub words: Vec<String>,
    pub log_prob: f64,
}

fn by_score(a: &Completion, b: &Completion) -> Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.words.cmp(&b.words))
}

fn mask_positions(tokens: &[&str]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == MASK)
        .map(|(i, _)| i)
        .collect()
}

fn ranked(
    oracle: &mut (impl Oracle + ?Sized),
    id: u64,
    text: String,
    mask_index: usize,
    vocabulary: &[String],
    k: usize,
) -> Result<Vec<(String, f64)>, ProbeError> {
    let query = OracleQuery {
        id,
        text,
        candidates: vocabulary.to_vec(),
        scoring_mode: ScoringMode::Masked,
        target: Target { mask_index },
    };
    let response = oracle.query_batch(std::slice::from_ref(&query))?.remove(0);
    let mut scored: Vec<(String, f64)> = response.log_probs.into_iter().collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Top-`k` completions of a text with one or two `[MASK]` tokens, scored over
/// `vocabulary`. Two masks are decoded greedily: the first mask keeps its
/// top `k` words, the second is re-queried for each, and all `k * k` joint
/// completions are ranked by summed log-probability.
pub fn fill_blank_topk<O: Oracle + ?Sized>(
    oracle: &mut O,
    text: &str,
    vocabulary: &[String],
    k: usize,
) -> Result<Vec<Completion>, ProbeError> {
    if k == 0 {
        return Err(ProbeError::InvalidK);
    }
    if vocabulary.is_empty() {
        return Err(ProbeError::InvalidSpec("empty vocabulary".into()));
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let masks = mask_positions(&tokens);
    let normalized = tokens.join(" ");
    let mut out = match masks.as_slice() {
        [first] => ranked(oracle, 0, normalized, *first, vocabulary, k)?
            .into_iter()
            .map(|(w, lp)| Completion {
                words: vec![w],
                log_prob: lp,
            })
            .collect::<Vec<_>>(),
        [first, _] => {
            let heads = ranked(oracle, 0, normalized, *first, vocabulary, k)?;
            let mut joint = Vec::with_capacity(heads.len() * k);
            for (n, (w1, lp1)) in heads.into_iter().enumerate() {
                let mut filled = tokens.clone();
                filled[*first] = &w1;
                let filled = filled.join(" ");
                let filled_tokens: Vec<&str> = filled.split_whitespace().collect();
                let second = mask_positions(&filled_tokens)[0];
                for (w2, lp2) in ranked(oracle, n as u64 + 1, filled.clone(), second, vocabulary, k)? {
                    joint.push(Completion {
                        words: vec![w1.clone(), w2],
                        log_prob: lp1 + lp2,
                    });
                }
            }
            joint
        }
        other => return Err(ProbeError::BadMaskCount(other.len())),
    };
    out.sort_by(by_score);
    Ok(out)
}
