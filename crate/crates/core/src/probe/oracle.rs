use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::ProbeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Probability of each candidate at a `[MASK]` position.
    Masked,
    /// Score of a candidate already present in the text at the target position.
    PseudoLikelihood,
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::Masked => "masked",
            ScoringMode::PseudoLikelihood => "pseudo_likelihood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    /// Whitespace-token index of the target position.
    pub mask_index: usize,
}

/// One request line of the oracle protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleQuery {
    pub id: u64,
    pub text: String,
    pub candidates: Vec<String>,
    pub scoring_mode: ScoringMode,
    pub target: Target,
}

/// Natural-log probabilities for every requested candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub id: u64,
    pub log_probs: BTreeMap<String, f64>,
}

/// A response line as it appears on the wire: either scores or an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireResponse {
    Scores(OracleResponse),
    Error { id: u64, error: String },
}

/// Anything that can answer a batch of queries. Responses come back in
/// query order regardless of the order the backend produced them.
pub trait Oracle {
    fn query_batch(&mut self, queries: &[OracleQuery]) -> Result<Vec<OracleResponse>, ProbeError>;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn query_batch(&mut self, queries: &[OracleQuery]) -> Result<Vec<OracleResponse>, ProbeError> {
        (**self).query_batch(queries)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn query_batch(&mut self, queries: &[OracleQuery]) -> Result<Vec<OracleResponse>, ProbeError> {
        (**self).query_batch(queries)
    }
}

fn check_response(query: &OracleQuery, response: OracleResponse) -> Result<OracleResponse, ProbeError> {
    for c in &query.candidates {
        match response.log_probs.get(c) {
            None => {
                return Err(ProbeError::OracleFailure {
                    id: query.id,
                    message: format!("response lacks candidate `{c}`"),
                })
            }
            Some(v) if !v.is_finite() || *v > 0.0 => {
                return Err(ProbeError::OracleFailure {
                    id: query.id,
                    message: format!("log-probability {v} for `{c}` is not a finite value <= 0"),
                })
            }
            Some(_) => {}
        }
    }
    Ok(response)
}

/// Reorder wire responses to match `queries`, rejecting errors, duplicates
/// and missing ids.
fn collate(queries: &[OracleQuery], lines: Vec<WireResponse>) -> Result<Vec<OracleResponse>, ProbeError> {
    let mut by_id: HashMap<u64, OracleResponse> = HashMap::with_capacity(lines.len());
    for line in lines {
        match line {
            WireResponse::Error { id, error } => return Err(ProbeError::OracleFailure { id, message: error }),
            WireResponse::Scores(r) => {
                let id = r.id;
                if by_id.insert(id, r).is_some() {
                    return Err(ProbeError::OracleFailure {
                        id,
                        message: "duplicate response".into(),
                    });
                }
            }
        }
    }
    queries
        .iter()
        .map(|q| {
            let r = by_id.remove(&q.id).ok_or_else(|| ProbeError::OracleFailure {
                id: q.id,
                message: "no response".into(),
            })?;
            check_response(q, r)
        })
        .collect()
}

/// One row of a lookup table: the probability of `candidate` at
/// `mask_index` of `text` under `mode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub mode: ScoringMode,
    pub text: String,
    pub mask_index: usize,
    pub candidate: String,
    pub prob: f64,
}

type ContextKey = (ScoringMode, String, usize);

/// Deterministic oracle answering by exact lookup. A missing entry is an
/// error, never a default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableOracle {
    table: BTreeMap<ContextKey, BTreeMap<String, f64>>,
    queries_seen: usize,
}

impl TableOracle {
    pub fn from_entries<I: IntoIterator<Item = TableEntry>>(entries: I) -> Result<Self, ProbeError> {
        let mut table: BTreeMap<ContextKey, BTreeMap<String, f64>> = BTreeMap::new();
        for e in entries {
            if !(e.prob > 0.0 && e.prob <= 1.0) {
                return Err(ProbeError::InvalidSpec(format!(
                    "table probability {} for `{}` is outside (0, 1]",
                    e.prob, e.candidate
                )));
            }
            table
                .entry((e.mode, e.text, e.mask_index))
                .or_default()
                .insert(e.candidate, e.prob);
        }
        Ok(TableOracle { table, queries_seen: 0 })
    }

    /// Read a JSONL file of [`TableEntry`] rows.
    pub fn load(path: &Path) -> Result<Self, ProbeError> {
        let file = File::open(path).map_err(|source| ProbeError::Io {
            context: format!("opening {}", path.display()),
            source,
        })?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| ProbeError::Io {
                context: format!("reading {}", path.display()),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|source| ProbeError::Json {
                context: format!("{} line {}", path.display(), n + 1),
                source,
            })?;
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> impl Iterator<Item = TableEntry> + '_ {
        self.table.iter().flat_map(|((mode, text, mask_index), cands)| {
            cands.iter().map(move |(candidate, &prob)| TableEntry {
                mode: *mode,
                text: text.clone(),
                mask_index: *mask_index,
                candidate: candidate.clone(),
                prob,
            })
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ProbeError> {
        let io_err = |source| ProbeError::Io {
            context: format!("writing {}", path.display()),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for e in self.entries() {
            let line = serde_json::to_string(&e).expect("table entries serialize");
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn probability(&self, mode: ScoringMode, text: &str, mask_index: usize, candidate: &str) -> Option<f64> {
        self.table
            .get(&(mode, text.to_string(), mask_index))
            .and_then(|c| c.get(candidate))
            .copied()
    }

    /// Every candidate recorded for a context, in lexicographic order.
    pub fn candidates_for(&self, mode: ScoringMode, text: &str, mask_index: usize) -> Vec<String> {
        self.table
            .get(&(mode, text.to_string(), mask_index))
            .map(|c| c.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Number of queries answered so far.
    pub fn queries_seen(&self) -> usize {
        self.queries_seen
    }
}

impl Oracle for TableOracle {
    fn query_batch(&mut self, queries: &[OracleQuery]) -> Result<Vec<OracleResponse>, ProbeError> {
        self.queries_seen += queries.len();
        queries
            .iter()
            .map(|q| {
                let key = (q.scoring_mode, q.text.clone(), q.target.mask_index);
                let row = self.table.get(&key);
                let log_probs = q
                    .candidates
                    .iter()
                    .map(|c| match row.and_then(|r| r.get(c)) {
                        Some(p) => Ok((c.clone(), p.ln())),
                        None => Err(ProbeError::MissingEntry {
                            context: format!("{}|{}|{}", q.scoring_mode.as_str(), q.text, q.target.mask_index),
                            candidate: c.clone(),
                        }),
                    })
                    .collect::<Result<_, _>>()?;
                Ok(OracleResponse { id: q.id, log_probs })
            })
            .collect()
    }
}

/// Oracle backed by a child process speaking the protocol on stdin/stdout.
pub struct ProcessOracle {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl ProcessOracle {
    /// Launch `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, ProbeError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|source| ProbeError::Io {
                context: format!("starting oracle `{command}`"),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(ProcessOracle { child, stdin, stdout })
    }
}

impl Oracle for ProcessOracle {
    fn query_batch(&mut self, queries: &[OracleQuery]) -> Result<Vec<OracleResponse>, ProbeError> {
        let first_id = queries.first().map_or(0, |q| q.id);
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(ProbeError::OracleFailure {
                id: first_id,
                message: "oracle input is closed".into(),
            });
        };
        let stdout = &mut self.stdout;
        // Write on a separate thread so a server that answers while still
        // reading cannot deadlock against a full pipe.
        let (write_result, lines) = std::thread::scope(|s| {
            let writer = s.spawn(move || -> std::io::Result<()> {
                let mut w = BufWriter::new(stdin);
                for q in queries {
                    serde_json::to_writer(&mut w, q)?;
                    w.write_all(b"\n")?;
                }
                w.flush()
            });
            let mut lines = Vec::with_capacity(queries.len());
            let mut failure = None;
            let mut buf = String::new();
            while lines.len() < queries.len() {
                buf.clear();
                match stdout.read_line(&mut buf) {
                    Ok(0) => {
                        failure = Some(ProbeError::OracleFailure {
                            id: queries[lines.len()].id,
                            message: format!(
                                "oracle closed its output after {} of {} responses",
                                lines.len(),
                                queries.len()
                            ),
                        });
                        break;
                    }
                    Ok(_) => match serde_json::from_str::<WireResponse>(&buf) {
                        Ok(r) => lines.push(r),
                        Err(e) => {
                            failure = Some(ProbeError::OracleFailure {
                                id: queries[lines.len()].id,
                                message: format!("unparseable response line: {e}"),
                            });
                            break;
                        }
                    },
                    Err(source) => {
                        failure = Some(ProbeError::Io {
                            context: "reading oracle output".into(),
                            source,
                        });
                        break;
                    }
                }
            }
            (
                writer.join().expect("writer thread panicked"),
                failure.map_or(Ok(lines), Err),
            )
        });
        let lines = lines?;
        write_result.map_err(|source| ProbeError::Io {
            context: "writing oracle queries".into(),
            source,
        })?;
        collate(queries, lines)
    }
}

impl Drop for ProcessOracle {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}

/// Oracle over paired request/response files: requests are appended to one
/// file and answers are read from a previously recorded response file.
pub struct TranscriptOracle {
    requests: BufWriter<File>,
    responses: HashMap<u64, WireResponse>,
}

impl TranscriptOracle {
    pub fn open(requests_path: &Path, responses_path: &Path) -> Result<Self, ProbeError> {
        let text = std::fs::read_to_string(responses_path).map_err(|source| ProbeError::Io {
            context: format!("reading {}", responses_path.display()),
            source,
        })?;
        let mut responses = HashMap::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: WireResponse = serde_json::from_str(line).map_err(|source| ProbeError::Json {
                context: format!("{} line {}", responses_path.display(), n + 1),
                source,
            })?;
            let id = match &r {
                WireResponse::Scores(s) => s.id,
                WireResponse::Error { id, .. } => *id,
            };
            responses.insert(id, r);
        }
        let requests = File::options()
            .create(true)
            .append(true)
            .open(requests_path)
            .map_err(|source| ProbeError::Io {
                context: format!("opening {}", requests_path.display()),
                source,
            })?;
        Ok(TranscriptOracle {
            requests: BufWriter::new(requests),
            responses,
        })
    }
}

impl Oracle for TranscriptOracle {
    fn query_batch(&mut self, queries: &[OracleQuery]) -> Result<Vec<OracleResponse>, ProbeError> {
        let io_err = |source| ProbeError::Io {
            context: "writing request transcript".into(),
            source,
        };
        for q in queries {
            serde_json::to_writer(&mut self.requests, q).map_err(|e| io_err(e.into()))?;
            self.requests.write_all(b"\n").map_err(io_err)?;
        }
        self.requests.flush().map_err(io_err)?;
        let lines = queries
            .iter()
            .filter_map(|q| self.responses.get(&q.id).cloned())
            .collect();
        collate(queries, lines)
    }
}
