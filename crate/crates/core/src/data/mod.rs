//! Input records, prediction-file parsing and clinical-note preparation.

mod io;
mod policy;
mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{load_predictions, load_predictions_from_reader, write_predictions, FileFormat};
pub use policy::{filter_groups, GroupPolicy};
pub use text::{aggregate_sentences, normalize_phi, select_backward, window_note};

/// Literal value used for an attribute that is missing from the input.
pub const UNKNOWN: &str = "UNKNOWN";

/// Protected attributes carried by every prediction record.
pub const ATTRIBUTES: [&str; 4] = ["gender", "language", "ethnicity", "insurance"];

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row {row}, field `{field}`: {reason}")]
    MalformedRow { row: usize, field: String, reason: String },
    #[error("patient {patient_id} appears in both {first} and {second} splits (row {row})")]
    SplitLeak {
        patient_id: String,
        first: Split,
        second: Split,
        row: usize,
    },
    #[error("duplicate key (patient {patient_id}, note {note_id}, subsequence {subsequence_index}, task {task_id}) at row {row}")]
    DuplicateKey {
        patient_id: String,
        note_id: String,
        subsequence_index: u32,
        task_id: String,
        row: usize,
    },
    #[error("attribute `{0}` is not present in the data")]
    UnknownAttribute(String),
    #[error("group policy for `{0}` both drops and collapses the same value")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One classifier output for a (patient, note, subsequence, task).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub patient_id: String,
    pub note_id: String,
    pub subsequence_index: u32,
    pub task_id: String,
    pub split: Split,
    pub probability: f64,
    pub label: u8,
    /// Attribute name to categorical value; absent attributes hold [`UNKNOWN`].
    pub attributes: BTreeMap<String, String>,
}

impl PredictionRecord {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// A clinical note after tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteDocument {
    pub note_id: String,
    pub patient_id: String,
    pub category: String,
    pub chart_order: i64,
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<String>,
}

impl NoteDocument {
    pub fn is_discharge_summary(&self) -> bool {
        self.category.trim().eq_ignore_ascii_case("discharge summary")
    }
}
