use std::fmt::Write as _;

use serde::Serialize;

use super::{AuditResult, FdrDecision};
use crate::metrics::{summarize_gaps, GapKind, GapSummary};
use crate::probe::GenderRatio;
use crate::stats::GapEstimate;

pub const GAP_COLUMNS: [&str; 12] = [
    "task",
    "attribute",
    "subgroup",
    "gap_kind",
    "value",
    "ci_low",
    "ci_high",
    "significant",
    "favored",
    "p_value",
    "adjusted_p",
    "fdr_significant",
];

/// Groups listed first in a two-group comparison when present.
const LEAD_GROUPS: [&str; 2] = ["Male", "English"];

/// Three decimals; never prints a negative zero.
pub(crate) fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn gap_cells(e: &GapEstimate, fdr: Option<&FdrDecision>) -> Vec<String> {
    vec![
        e.task_id.clone(),
        e.attribute.clone(),
        e.subgroup.clone(),
        e.point.kind.to_string(),
        fmt3(e.point.value),
        fmt3(e.ci_low),
        fmt3(e.ci_high),
        e.significant.to_string(),
        e.point.favored_group.clone().unwrap_or_default(),
        e.p_value.map(fmt3).unwrap_or_default(),
        fdr.map(|d| fmt3(d.adjusted_p)).unwrap_or_default(),
        fdr.map(|d| d.rejected.to_string()).unwrap_or_default(),
    ]
}

fn rows(result: &AuditResult) -> impl Iterator<Item = Vec<String>> + '_ {
    result
        .estimates
        .iter()
        .enumerate()
        .map(|(i, e)| gap_cells(e, result.fdr.as_ref().map(|f| &f[i])))
}

pub fn render_gaps_csv(result: &AuditResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GAP_COLUMNS).expect("writing to memory");
    for row in rows(result) {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is UTF-8")
}

pub fn render_gaps_markdown(result: &AuditResult) -> String {
    markdown_table(&GAP_COLUMNS, rows(result))
}

/// Pipe table with a header rule.
pub fn markdown_table<R, S>(headers: &[&str], rows: impl IntoIterator<Item = R>) -> String
where
    R: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", headers.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(headers.len()));
    for row in rows {
        let cells: Vec<&str> = row.as_ref().iter().map(AsRef::as_ref).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

fn title_case(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

fn quoted(group: &str) -> String {
    if group == "Other" {
        "\"Other\"".into()
    } else {
        group.to_string()
    }
}

/// `Male vs. Female (% of Tasks Favoring Male)` for two groups,
/// `White vs. Other (% of Tasks Favoring White)` for more.
pub fn comparison_label(subgroup: &str, groups: &[String]) -> String {
    let versus = match groups {
        [a, b] if a == subgroup => b.clone(),
        [a, b] if b == subgroup => a.clone(),
        _ => "Other".into(),
    };
    let name = if groups.len() > 2 {
        quoted(subgroup)
    } else {
        subgroup.to_string()
    };
    format!("{name} vs. {versus} (% of Tasks Favoring {name})")
}

/// Rows of the significance summary: one per subgroup, or one per
/// attribute when it has exactly two groups.
pub fn summary_rows(estimates: &[GapEstimate], subgroups: &[(String, Vec<String>)]) -> Vec<(String, GapSummary)> {
    let mut out = Vec::new();
    for (attribute, groups) in subgroups {
        let listed: Vec<&String> = if groups.len() == 2 {
            let lead = groups
                .iter()
                .find(|g| LEAD_GROUPS.contains(&g.as_str()))
                .unwrap_or(&groups[0]);
            vec![lead]
        } else {
            groups.iter().collect()
        };
        for g in listed {
            out.push((comparison_label(g, groups), summarize_gaps(estimates, attribute, g)));
        }
    }
    out
}

/// Markdown table of significant-task counts with the percentage favoring
/// each subgroup, e.g. `13 (62%)`.
pub fn render_summary_markdown(
    title: &str,
    estimates: &[GapEstimate],
    subgroups: &[(String, Vec<String>)],
    kinds: &[GapKind],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## {title}\n");
    let headers: Vec<String> = kinds
        .iter()
        .map(|k| format!("{} Gap", title_case(k.as_str())))
        .collect();
    let _ = writeln!(out, "| Attribute | Comparison | {} |", headers.join(" | "));
    let _ = writeln!(out, "|---|---|{}", "---|".repeat(kinds.len()));
    for (label, summary) in summary_rows(estimates, subgroups) {
        let cells: Vec<String> = kinds.iter().map(|&k| summary.cell(k).to_string()).collect();
        let _ = writeln!(
            out,
            "| {} | {label} | {} |",
            title_case(&summary.attribute),
            cells.join(" | ")
        );
    }
    out
}

/// One topic of the bias-score table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub topic: String,
    pub mean_male: f64,
    pub mean_female: f64,
    /// `None` when the test was undefined (all pairs tied).
    pub p_value: Option<f64>,
    pub significant: bool,
    pub samples: usize,
    pub gender_ratio: Option<GenderRatio>,
    pub sample_template: String,
}

pub fn render_probe_table(rows: &[ProbeRow]) -> String {
    let mut out = String::new();
    let with_ratio = rows.iter().any(|r| r.gender_ratio.is_some());
    let ratio_head = if with_ratio { " Gender Ratio (M, F) |" } else { "" };
    let ratio_rule = if with_ratio { "---|" } else { "" };
    let _ = writeln!(out, "| Topic | M | F | # of Templates |{ratio_head} Sample Template |");
    let _ = writeln!(out, "|---|---|---|---|{ratio_rule}---|");
    for r in rows {
        let star = if r.significant { "*" } else { "" };
        let ratio = if with_ratio {
            format!(" {} |", r.gender_ratio.map_or("n/a".to_string(), |g| g.to_string()))
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "| {} | {}{star} | {}{star} | {} |{ratio} {} |",
            r.topic,
            fmt3(r.mean_male),
            fmt3(r.mean_female),
            r.samples,
            r.sample_template
        );
    }
    out
}
