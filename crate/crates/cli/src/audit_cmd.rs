//! `audit`, `merge`, `gen-cohort` and `report`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fairaudit_core::audit::{
    gen_cohort, is_known_task, markdown_table, render_gaps_csv, render_gaps_markdown, render_summary_markdown,
    run_audit, AuditOptions, CohortSpec, GAP_COLUMNS,
};
use fairaudit_core::data::{load_predictions, write_predictions, FileFormat, PredictionRecord, Split};
use fairaudit_core::metrics::{
    merge_subsequence_probs, tune_scaling_factor, GapKind, NoteMergeInput, DEFAULT_SCALING_CANDIDATES,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::output::{read_config, write_all, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Checked-in audit configuration. Every field can be overridden by a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct AuditConfig {
    predictions: Option<PathBuf>,
    out: Option<PathBuf>,
    formats: Option<Vec<ReportFormat>>,
    #[serde(flatten)]
    options: AuditOptions,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// JSON config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prediction file (CSV, or JSONL by extension).
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    attributes: Option<Vec<String>>,
    /// Gap kinds: recall, parity, specificity.
    #[arg(long, value_delimiter = ',')]
    gaps: Option<Vec<GapKind>>,
    /// Bootstrap replicates.
    #[arg(long = "bootstrap-b")]
    bootstrap_b: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// FDR level for the corrected summary.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, overrides_with = "no_fdr")]
    fdr: bool,
    #[arg(long, overrides_with = "fdr")]
    no_fdr: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<ReportFormat>>,
}

pub fn audit(args: AuditArgs) -> CliResult<()> {
    let mut config: AuditConfig = match &args.config {
        Some(path) => read_config(path)?,
        None => AuditConfig::default(),
    };
    let opts = &mut config.options;
    if let Some(a) = args.attributes {
        opts.attributes = a;
    }
    if let Some(g) = args.gaps {
        opts.gap_kinds = g;
    }
    if let Some(b) = args.bootstrap_b {
        opts.bootstrap.replicates = b;
    }
    if let Some(s) = args.seed {
        opts.bootstrap.master_seed = s;
    }
    if let Some(a) = args.alpha {
        opts.alpha = a;
    }
    if args.fdr {
        opts.fdr = true;
    }
    if args.no_fdr {
        opts.fdr = false;
    }
    opts.validate()?;
    let predictions = args
        .predictions
        .or(config.predictions)
        .ok_or_else(|| CliError::Usage("no predictions file given (--predictions or config)".into()))?;
    let out = args
        .out
        .or(config.out)
        .ok_or_else(|| CliError::Usage("no output directory given (--out or config)".into()))?;
    let mut formats = args
        .format
        .or(config.formats)
        .unwrap_or_else(|| vec![ReportFormat::Csv, ReportFormat::Markdown]);
    formats.sort();
    formats.dedup();

    let records = load_predictions(&predictions, FileFormat::from_path(&predictions))?;
    let mut unknown: Vec<&str> = records
        .iter()
        .map(|r| r.task_id.as_str())
        .filter(|t| !is_known_task(t))
        .collect();
    unknown.sort_unstable();
    unknown.dedup();
    if !unknown.is_empty() {
        log::warn!(
            "{} task ids outside the standard list, e.g. `{}`",
            unknown.len(),
            unknown[0]
        );
    }

    let result = run_audit(&records, &config.options)?;
    for note in &result.skipped {
        log::warn!("skipped {note}");
    }

    let mut files = Vec::new();
    if formats.contains(&ReportFormat::Csv) {
        files.push(("gaps.csv".to_string(), render_gaps_csv(&result)));
    }
    if formats.contains(&ReportFormat::Markdown) {
        files.push(("gaps.md".to_string(), render_gaps_markdown(&result)));
    }
    let subgroups = result.subgroups();
    let kinds = &config.options.gap_kinds;
    let level = config.options.bootstrap.level * 100.0;
    let mut summary = render_summary_markdown(
        &format!("Significant gaps ({level:.0}% bootstrap interval)"),
        &result.estimates,
        &subgroups,
        kinds,
    );
    if let Some(corrected) = result.fdr_estimates() {
        summary.push('\n');
        summary.push_str(&render_summary_markdown(
            &format!(
                "Significant gaps (Benjamini-Hochberg, alpha = {})",
                config.options.alpha
            ),
            &corrected,
            &subgroups,
            kinds,
        ));
    }
    files.push(("summary.md".to_string(), summary));
    let mut thresholds = String::from("task,threshold\n");
    for (task, t) in &result.thresholds {
        thresholds.push_str(&format!("\"{}\",{t}\n", task.replace('"', "\"\"")));
    }
    files.push(("thresholds.csv".to_string(), thresholds));
    write_all(&out, &files)?;

    let flagged = result.estimates.iter().filter(|e| e.significant).count();
    let after = result
        .fdr
        .as_ref()
        .map(|f| format!(", {} after FDR control", f.iter().filter(|d| d.rejected).count()))
        .unwrap_or_default();
    println!(
        "{} gap estimates, {flagged} significant{after}; reports in {}",
        result.estimates.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Subsequence-level prediction file.
    #[arg(long)]
    predictions: PathBuf,
    /// Fixed scaling factor for every task.
    #[arg(long, conflicts_with = "tune", required_unless_present = "tune")]
    c: Option<f64>,
    /// Pick the scaling factor per task by validation AUPRC.
    #[arg(long)]
    tune: bool,
    /// Candidate factors for --tune.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<f64>>,
    /// Note-level output file (CSV, or JSONL by extension).
    #[arg(long)]
    out: PathBuf,
}

type NoteKey = (String, String, String);

pub fn merge(args: MergeArgs) -> CliResult<()> {
    let records = load_predictions(&args.predictions, FileFormat::from_path(&args.predictions))?;
    let mut notes: BTreeMap<NoteKey, (PredictionRecord, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let key = (r.task_id.clone(), r.patient_id.clone(), r.note_id.clone());
        match notes.get_mut(&key) {
            Some((first, probs)) => {
                if first.label != r.label || first.split != r.split {
                    return Err(CliError::Data(format!(
                        "note {} of patient {} has inconsistent labels or splits for task {}",
                        r.note_id, r.patient_id, r.task_id
                    )));
                }
                probs.push(r.probability);
            }
            None => {
                let p = r.probability;
                notes.insert(key, (r, vec![p]));
            }
        }
    }

    let mut factors: BTreeMap<String, f64> = BTreeMap::new();
    let tasks: Vec<String> = {
        let mut t: Vec<String> = notes.keys().map(|k| k.0.clone()).collect();
        t.dedup();
        t
    };
    for task in &tasks {
        let c = match args.c {
            Some(c) => c,
            None => {
                let validation: Vec<(Vec<f64>, u8)> = notes
                    .iter()
                    .filter(|(k, (r, _))| &k.0 == task && r.split == Split::Validation)
                    .map(|(_, (r, p))| (p.clone(), r.label))
                    .collect();
                let candidates = args.candidates.as_deref().unwrap_or(&DEFAULT_SCALING_CANDIDATES);
                tune_scaling_factor(&validation, candidates)
                    .map_err(|e| CliError::Data(format!("tuning task {task}: {e}")))?
            }
        };
        factors.insert(task.clone(), c);
    }

    let mut merged = Vec::with_capacity(notes.len());
    for ((task, _, _), (mut record, probs)) in notes {
        let input = NoteMergeInput::new(probs, factors[&task]).map_err(|e| CliError::Usage(e.to_string()))?;
        record.probability = merge_subsequence_probs(&input);
        record.subsequence_index = 0;
        merged.push(record);
    }
    let comments: Vec<String> = factors.iter().map(|(t, c)| format!("scaling_factor {t} {c}")).collect();
    write_records(&args.out, &merged, &comments)?;
    println!(
        "{} notes over {} tasks written to {}",
        merged.len(),
        factors.len(),
        args.out.display()
    );
    Ok(())
}

fn write_records(path: &Path, records: &[PredictionRecord], comments: &[String]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_predictions(&mut buf, records, FileFormat::from_path(path), comments)
        .map_err(|e| CliError::Runtime(format!("rendering {}: {e}", path.display())))?;
    write_atomic(path, &buf)
}

#[derive(Debug, Args)]
pub struct GenCohortArgs {
    /// Number of tasks, taken from the start of the standard task list.
    #[arg(long, default_value_t = 10)]
    tasks: usize,
    /// Task indices with a planted gender recall gap.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 4, 7])]
    planted: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    recall_gap: f64,
    /// Output prediction file (CSV, or JSONL by extension).
    #[arg(long)]
    out: PathBuf,
}

pub fn gen_cohort_cmd(args: GenCohortArgs) -> CliResult<()> {
    let spec = CohortSpec {
        tasks: args.tasks,
        planted: args.planted,
        recall_gap: args.recall_gap,
    };
    if spec.tasks == 0 || spec.planted.iter().any(|&i| i >= spec.tasks) {
        return Err(CliError::Usage("planted indices must lie below --tasks".into()));
    }
    if !(0.0..=0.8).contains(&spec.recall_gap) {
        return Err(CliError::Usage("recall gap must lie in [0, 0.8]".into()));
    }
    let records = gen_cohort(&spec);
    let comment = format!("planted {}", spec.planted_names().join("; "));
    write_records(&args.out, &records, &[comment])?;
    println!("{} records written to {}", records.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Gap CSV files written by `audit`.
    #[arg(long, num_args = 0..)]
    inputs: Vec<PathBuf>,
    /// Merged Markdown file.
    #[arg(long)]
    out: PathBuf,
}

pub fn report(args: ReportArgs) -> CliResult<()> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    for path in &args.inputs {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if headers.iter().ne(GAP_COLUMNS) {
            return Err(CliError::Data(format!(
                "{}: expected columns {}",
                path.display(),
                GAP_COLUMNS.join(",")
            )));
        }
        for (n, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| CliError::Data(format!("{} row {}: {e}", path.display(), n + 1)))?;
            rows.push(row.iter().map(String::from).collect());
        }
    }
    write_atomic(&args.out, markdown_table(&GAP_COLUMNS, &rows).as_bytes())?;
    println!(
        "{} rows from {} files written to {}",
        rows.len(),
        args.inputs.len(),
        args.out.display()
    );
    Ok(())
}
