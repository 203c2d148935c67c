//! `probe` and `fill`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fairaudit_core::audit::{render_probe_table, ProbeRow};
use fairaudit_core::data::NoteDocument;
use fairaudit_core::probe::{
    calc_log_score, compare_gender_scores, corpus_gender_ratio, fill_blank_topk, GenderRatio, Oracle, ProbeError,
    ProbeMode, ProbeOptions, ProcessOracle, ScoringMode, TableOracle, TemplateSpec, ATTRIBUTE_MARKER, MASK,
    TARGET_ALIAS, TARGET_MARKER,
};
use fairaudit_core::stats::StatsError;
use serde::{Deserialize, Serialize};

use crate::error::{input_error, CliError, CliResult};
use crate::output::{to_json, write_all};

#[derive(Debug, Args)]
#[group(id = "oracle", required = true, multiple = false)]
pub struct OracleArgs {
    /// Shell command of a process speaking the oracle protocol.
    #[arg(long, group = "oracle")]
    oracle_cmd: Option<String>,
    /// JSONL lookup table of probabilities.
    #[arg(long, group = "oracle")]
    oracle_table: Option<PathBuf>,
}

enum AnyOracle {
    Table(TableOracle),
    Process(ProcessOracle),
}

impl AnyOracle {
    fn open(args: &OracleArgs) -> CliResult<Self> {
        match (&args.oracle_cmd, &args.oracle_table) {
            (Some(cmd), _) => Ok(AnyOracle::Process(ProcessOracle::spawn(cmd)?)),
            (None, Some(path)) => Ok(AnyOracle::Table(TableOracle::load(path).map_err(input_error)?)),
            (None, None) => Err(CliError::Usage("give --oracle-cmd or --oracle-table".into())),
        }
    }

    fn as_dyn(&mut self) -> &mut dyn Oracle {
        match self {
            AnyOracle::Table(t) => t,
            AnyOracle::Process(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Prior with the attribute filled in.
    Literal,
    /// Prior with the attribute masked as well.
    BothMasked,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Template files, or directories of `*.json` template files.
    #[arg(long, required = true, num_args = 1..)]
    templates: Vec<PathBuf>,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Literal)]
    mode: ModeArg,
    /// One prior query per (template, filler) for all target words.
    #[arg(long)]
    batch_priors: bool,
    /// Significance level of the signed-rank test.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Notes (JSONL) for the corpus gender ratio column.
    #[arg(long, requires = "patients")]
    notes: Option<PathBuf>,
    /// CSV with `patient_id,gender,label` for the gender ratio column.
    #[arg(long, requires = "notes")]
    patients: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn template_files(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Data("no template files found".into()));
    }
    Ok(files)
}

/// First template with the first filler, target slot shown as `[GEND]`.
fn sample_template(spec: &TemplateSpec) -> String {
    spec.templates[0]
        .replacen(ATTRIBUTE_MARKER, &spec.attributes[0], 1)
        .replacen(TARGET_MARKER, TARGET_ALIAS, 1)
}

#[derive(Debug, Deserialize)]
struct PatientRow {
    patient_id: String,
    gender: String,
    label: u8,
}

type PatientTables = (BTreeMap<String, String>, BTreeMap<String, bool>);

fn load_corpus(notes: &Path, patients: &Path) -> CliResult<(Vec<NoteDocument>, PatientTables)> {
    let text = fs::read_to_string(notes).map_err(|e| CliError::Data(format!("{}: {e}", notes.display())))?;
    let docs = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Data(format!("{} line {}: {e}", notes.display(), n + 1)))
        })
        .collect::<CliResult<Vec<NoteDocument>>>()?;
    let mut rdr =
        csv::Reader::from_path(patients).map_err(|e| CliError::Data(format!("{}: {e}", patients.display())))?;
    let (mut genders, mut labels) = (BTreeMap::new(), BTreeMap::new());
    for (n, row) in rdr.deserialize::<PatientRow>().enumerate() {
        let row = row.map_err(|e| CliError::Data(format!("{} row {}: {e}", patients.display(), n + 1)))?;
        labels.insert(row.patient_id.clone(), row.label == 1);
        genders.insert(row.patient_id, row.gender);
    }
    Ok((docs, (genders, labels)))
}

#[derive(Serialize)]
struct TopicResult<'a> {
    row: &'a ProbeRow,
    statistic: Option<f64>,
    method: Option<String>,
    pairs: usize,
}

pub fn probe(args: ProbeArgs) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let specs = template_files(&args.templates)?
        .iter()
        .map(|p| TemplateSpec::load(p).map_err(input_error))
        .collect::<CliResult<Vec<_>>>()?;
    for spec in &specs {
        spec.validate().map_err(input_error)?;
    }
    let corpus = match (&args.notes, &args.patients) {
        (Some(n), Some(p)) => Some(load_corpus(n, p)?),
        _ => None,
    };
    let options = ProbeOptions {
        mode: match args.mode {
            ModeArg::Literal => ProbeMode::Literal,
            ModeArg::BothMasked => ProbeMode::BothMaskedPrior,
        },
        batch_priors: args.batch_priors,
    };

    let mut oracle = AnyOracle::open(&args.oracle)?;
    let mut rows = Vec::with_capacity(specs.len());
    let mut details = Vec::with_capacity(specs.len());
    for spec in &specs {
        let scores = calc_log_score(spec, oracle.as_dyn(), &options)?;
        let (comparison, p_value, significant) = match compare_gender_scores(&scores, args.alpha) {
            Ok(c) => {
                let p = c.test.p_two_sided;
                (Some(c), Some(p), p < args.alpha)
            }
            // Every pair tied: the test is undefined and nothing is significant.
            Err(ProbeError::Stats(StatsError::DegenerateSample)) => (None, None, false),
            Err(e) => return Err(e.into()),
        };
        let mean =
            |side: &[fairaudit_core::probe::ScoreSample]| side.iter().map(|s| s.score).sum::<f64>() / side.len() as f64;
        let gender_ratio: Option<GenderRatio> = corpus
            .as_ref()
            .map(|(docs, (genders, labels))| corpus_gender_ratio(docs, &spec.attributes, genders, labels));
        rows.push(ProbeRow {
            topic: spec.topic.clone(),
            mean_male: mean(&scores.male),
            mean_female: mean(&scores.female),
            p_value,
            significant,
            samples: spec.sample_count(),
            gender_ratio,
            sample_template: sample_template(spec),
        });
        details.push((
            comparison.as_ref().map(|c| c.test.statistic),
            comparison
                .as_ref()
                .map(|c| format!("{:?}", c.test.method).to_lowercase()),
            comparison.as_ref().map_or(0, |c| c.paired_male.len()),
        ));
    }
    drop(oracle);

    let json: Vec<TopicResult> = rows
        .iter()
        .zip(&details)
        .map(|(row, (statistic, method, pairs))| TopicResult {
            row,
            statistic: *statistic,
            method: method.clone(),
            pairs: *pairs,
        })
        .collect();
    let files = vec![
        ("probe.md".to_string(), render_probe_table(&rows)),
        ("probe.json".to_string(), to_json(&json)),
    ];
    write_all(&args.out, &files)?;
    print!("{}", files[0].1);
    Ok(())
}

#[derive(Debug, Args)]
pub struct FillArgs {
    /// Text with one or two `[MASK]` tokens.
    #[arg(long)]
    text: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[command(flatten)]
    oracle: OracleArgs,
    /// Candidate words. Defaults to every word the table lists for the first mask.
    #[arg(long, value_delimiter = ',')]
    vocab: Option<Vec<String>>,
}

pub fn fill(args: FillArgs) -> CliResult<()> {
    let mut oracle = AnyOracle::open(&args.oracle)?;
    let vocabulary = match (&args.vocab, &oracle) {
        (Some(v), _) => v.clone(),
        (None, AnyOracle::Table(t)) => {
            let tokens: Vec<&str> = args.text.split_whitespace().collect();
            let index = tokens
                .iter()
                .position(|t| *t == MASK)
                .ok_or(ProbeError::BadMaskCount(0))?;
            t.candidates_for(ScoringMode::Masked, &tokens.join(" "), index)
        }
        (None, AnyOracle::Process(_)) => return Err(CliError::Usage("--vocab is required with --oracle-cmd".into())),
    };
    if vocabulary.is_empty() {
        return Err(CliError::Usage("no candidate words for this text".into()));
    }
    for c in fill_blank_topk(oracle.as_dyn(), &args.text, &vocabulary, args.k)?
        .into_iter()
        .take(args.k)
    {
        println!("{}\t{:.4}", c.words.join(" "), c.log_prob);
    }
    Ok(())
}
