use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde_json::Value;

use super::{DataError, PredictionRecord, Split, ATTRIBUTES, UNKNOWN};

const REQUIRED: [&str; 7] = [
    "patient_id",
    "note_id",
    "subsequence_index",
    "task_id",
    "split",
    "probability",
    "label",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Jsonl,
}

impl FileFormat {
    /// Guess the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("jsonl") || ext.eq_ignore_ascii_case("ndjson") => FileFormat::Jsonl,
            _ => FileFormat::Csv,
        }
    }
}

pub fn load_predictions(path: &Path, format: FileFormat) -> Result<Vec<PredictionRecord>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_predictions_from_reader(BufReader::new(file), format)
}

/// Parse and validate prediction records. Rows are numbered from 1, header excluded.
pub fn load_predictions_from_reader<R: Read>(
    reader: R,
    format: FileFormat,
) -> Result<Vec<PredictionRecord>, DataError> {
    let records = match format {
        FileFormat::Csv => parse_csv(reader)?,
        FileFormat::Jsonl => parse_jsonl(reader)?,
    };
    validate(&records)?;
    Ok(records)
}

fn malformed(row: usize, field: &str, reason: impl Into<String>) -> DataError {
    DataError::MalformedRow {
        row,
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Field lookup by column name, shared by the CSV and JSONL readers.
type FieldLookup<'a> = Box<dyn Fn(&str) -> Option<String> + 'a>;

struct RawRow<'a> {
    row: usize,
    get: FieldLookup<'a>,
}

impl RawRow<'_> {
    fn required(&self, field: &str) -> Result<String, DataError> {
        match (self.get)(field) {
            Some(v) if !v.trim().is_empty() => Ok(v.trim().to_string()),
            _ => Err(malformed(self.row, field, "missing value")),
        }
    }

    fn into_record(self) -> Result<PredictionRecord, DataError> {
        let row = self.row;
        let subsequence_index = self
            .required("subsequence_index")?
            .parse::<u32>()
            .map_err(|e| malformed(row, "subsequence_index", e.to_string()))?;
        let split = self
            .required("split")?
            .parse::<Split>()
            .map_err(|e| malformed(row, "split", e))?;
        let probability = self
            .required("probability")?
            .parse::<f64>()
            .map_err(|e| malformed(row, "probability", e.to_string()))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(malformed(
                row,
                "probability",
                format!("{probability} is outside [0, 1]"),
            ));
        }
        let label = match self.required("label")?.as_str() {
            "0" | "0.0" | "false" => 0,
            "1" | "1.0" | "true" => 1,
            other => return Err(malformed(row, "label", format!("`{other}` is not 0 or 1"))),
        };
        let attributes = ATTRIBUTES
            .iter()
            .map(|&name| {
                let value = (self.get)(name)
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .unwrap_or_else(|| UNKNOWN.to_string());
                (name.to_string(), value)
            })
            .collect::<BTreeMap<_, _>>();
        Ok(PredictionRecord {
            patient_id: self.required("patient_id")?,
            note_id: self.required("note_id")?,
            subsequence_index,
            task_id: self.required("task_id")?,
            split,
            probability,
            label,
            attributes,
        })
    }
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<PredictionRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| malformed(0, "header", e.to_string()))?
        .clone();
    let columns: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    for field in REQUIRED {
        if !columns.contains_key(field) {
            return Err(malformed(0, field, "required column missing from header"));
        }
    }

    let mut out = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| malformed(row, "row", e.to_string()))?;
        let raw = RawRow {
            row,
            get: Box::new(|name: &str| columns.get(name).and_then(|&idx| record.get(idx)).map(str::to_string)),
        };
        out.push(raw.into_record()?);
    }
    Ok(out)
}

fn json_scalar(value: &Value) -> Option<String> {
    match value {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        other => Some(other.to_string()),
    }
}

fn parse_jsonl<R: Read>(reader: R) -> Result<Vec<PredictionRecord>, DataError> {
    let mut out = Vec::new();
    let mut row = 0;
    for line in BufReader::new(reader).lines() {
        let line = line.map_err(|e| malformed(row + 1, "line", e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        row += 1;
        let value: Value = serde_json::from_str(trimmed).map_err(|e| malformed(row, "line", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed(row, "line", "expected a JSON object"))?;
        let raw = RawRow {
            row,
            get: Box::new(|name: &str| obj.get(name).and_then(json_scalar)),
        };
        out.push(raw.into_record()?);
    }
    Ok(out)
}

fn validate(records: &[PredictionRecord]) -> Result<(), DataError> {
    let mut splits: HashMap<&str, Split> = HashMap::new();
    let mut keys: HashSet<(&str, &str, u32, &str)> = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        let row = i + 1;
        if let Some(&first) = splits.get(r.patient_id.as_str()) {
            if first != r.split {
                return Err(DataError::SplitLeak {
                    patient_id: r.patient_id.clone(),
                    first,
                    second: r.split,
                    row,
                });
            }
        } else {
            splits.insert(&r.patient_id, r.split);
        }
        let key = (
            r.patient_id.as_str(),
            r.note_id.as_str(),
            r.subsequence_index,
            r.task_id.as_str(),
        );
        if !keys.insert(key) {
            return Err(DataError::DuplicateKey {
                patient_id: r.patient_id.clone(),
                note_id: r.note_id.clone(),
                subsequence_index: r.subsequence_index,
                task_id: r.task_id.clone(),
                row,
            });
        }
    }
    Ok(())
}

fn header() -> Vec<&'static str> {
    REQUIRED.iter().chain(ATTRIBUTES.iter()).copied().collect()
}

fn attribute_or_unknown<'a>(record: &'a PredictionRecord, name: &str) -> &'a str {
    record.attribute(name).unwrap_or(UNKNOWN)
}

/// Serialize records; `comments` are emitted first as `# ` lines, which the loader skips.
pub fn write_predictions<W: Write>(
    mut writer: W,
    records: &[PredictionRecord],
    format: FileFormat,
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(writer, "# {c}")?;
    }
    match format {
        FileFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(writer);
            wtr.write_record(header())?;
            for r in records {
                let mut row = vec![
                    r.patient_id.clone(),
                    r.note_id.clone(),
                    r.subsequence_index.to_string(),
                    r.task_id.clone(),
                    r.split.to_string(),
                    r.probability.to_string(),
                    r.label.to_string(),
                ];
                row.extend(ATTRIBUTES.iter().map(|a| attribute_or_unknown(r, a).to_string()));
                wtr.write_record(&row)?;
            }
            wtr.flush()?;
        }
        FileFormat::Jsonl => {
            for r in records {
                let mut obj = serde_json::Map::new();
                obj.insert("patient_id".into(), r.patient_id.clone().into());
                obj.insert("note_id".into(), r.note_id.clone().into());
                obj.insert("subsequence_index".into(), r.subsequence_index.into());
                obj.insert("task_id".into(), r.task_id.clone().into());
                obj.insert("split".into(), r.split.as_str().into());
                obj.insert("probability".into(), r.probability.into());
                obj.insert("label".into(), r.label.into());
                for a in ATTRIBUTES {
                    obj.insert(a.into(), attribute_or_unknown(r, a).into());
                }
                serde_json::to_writer(&mut writer, &Value::Object(obj))?;
                writer.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}
