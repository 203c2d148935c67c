//! Prior-adjusted log-probability bias scores over a masked language model.
//!
//! The model is reached only through the [`Oracle`] trait, which speaks a
//! line-delimited JSON protocol (see [`OracleQuery`] / [`OracleResponse`]).
//! [`TableOracle`] is a deterministic lookup table used for tests and
//! fixtures; [`ProcessOracle`] drives an external model server.

mod corpus;
mod fill;
mod oracle;
mod score;
mod template;

pub use corpus::{corpus_gender_ratio, GenderRatio};
pub use fill::{fill_blank_topk, Completion};
pub use oracle::{
    Oracle, OracleQuery, OracleResponse, ProcessOracle, ScoringMode, TableEntry, TableOracle, Target, TranscriptOracle,
    WireResponse,
};
pub use score::{
    calc_log_score, compare_gender_scores, format_score, ProbeComparison, ProbeMode, ProbeOptions, ProbeScores,
    ScoreSample,
};
pub use template::{
    expand_templates, GenderSide, PlannedProbe, TemplateSpec, ATTRIBUTE_MARKER, MASK, TARGET_ALIAS, TARGET_MARKER,
};

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("template {index} is malformed: {reason}")]
    BadTemplate { index: usize, reason: String },
    #[error("invalid template spec: {0}")]
    InvalidSpec(String),
    #[error("oracle failed on query {id}: {message}")]
    OracleFailure { id: u64, message: String },
    #[error("no table entry for context `{context}` and candidate `{candidate}`")]
    MissingEntry { context: String, candidate: String },
    #[error("non-finite score for template {template}, word `{word}`")]
    NonFiniteScore { template: usize, word: String },
    #[error("expected one or two `[MASK]` tokens, found {0}")]
    BadMaskCount(usize),
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Whitespace-token index of the token that contains byte offset `offset`.
pub(crate) fn token_index_at(text: &str, offset: usize) -> usize {
    text[..offset].split_whitespace().count()
}
