use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fairaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairaudit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn repo_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HEADER: &str = "patient_id,note_id,subsequence_index,task_id,split,probability,label\n";

#[test]
fn missing_predictions_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "nope.csv");
    let out = fairaudit(&["audit", "--predictions", &missing, "--out", &path(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope.csv"), "{}", stderr(&out));
}

#[test]
fn bad_options_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = path(dir.path(), "c.json");
    std::fs::write(&config, "{ not json").unwrap();
    let out = fairaudit(&["audit", "--config", &config, "--out", &path(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(1));

    let preds = path(dir.path(), "p.csv");
    std::fs::write(&preds, format!("{HEADER}p1,n1,0,t,test,0.5,1\n")).unwrap();
    let out = fairaudit(&[
        "audit",
        "--predictions",
        &preds,
        "--alpha",
        "2",
        "--out",
        &path(dir.path(), "o"),
    ]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(fairaudit(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(fairaudit(&["--help"]).status.code(), Some(0));
}

fn merged(dir: &Path, input: &str, args: &[&str]) -> (String, Output) {
    let preds = path(dir, "subseq.csv");
    std::fs::write(&preds, format!("{HEADER}{input}")).unwrap();
    let out_file = path(dir, "notes.csv");
    let mut full = vec!["merge", "--predictions", &preds, "--out", &out_file];
    full.extend_from_slice(args);
    let out = fairaudit(&full);
    (std::fs::read_to_string(&out_file).unwrap_or_default(), out)
}

fn probabilities(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("patient_id"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[5].parse().unwrap())
        })
        .collect()
}

#[test]
fn merge_applies_the_scaling_formula() {
    let dir = tempfile::tempdir().unwrap();
    let input = "p1,a,0,t,test,0.2,1\np1,a,1,t,test,0.6,1\np2,b,0,t,test,0.35,0\n";
    let (csv, out) = merged(dir.path(), input, &["--c", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    // Two subsequences, c = 2: (0.6 + 0.4 * 1) / 2.
    let probs = probabilities(&csv);
    assert_eq!(probs.len(), 2);
    assert!((probs[0].1 - 0.5).abs() < 1e-12);
    assert_eq!(probs[1], ("b".to_string(), 0.35));
    assert!(csv.contains("scaling_factor t 2"), "{csv}");
}

#[test]
fn merge_tuning_breaks_ties_toward_the_smallest_factor() {
    let dir = tempfile::tempdir().unwrap();
    let input = "v1,a,0,t,validation,0.9,1\nv1,a,1,t,validation,0.7,1\nv2,b,0,t,validation,0.1,0\n\
                 p1,c,0,t,test,0.4,1\n";
    let (csv, out) = merged(dir.path(), input, &["--tune", "--candidates", "8,2,4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(csv.contains("scaling_factor t 2"), "{csv}");
}

#[test]
fn merge_rejects_inconsistent_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = merged(dir.path(), "p1,a,0,t,test,0.2,1\np1,a,1,t,test,0.6,0\n", &["--c", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

fn probe(dir: &Path, table: &str) -> Output {
    fairaudit(&[
        "probe",
        "--templates",
        &repo_file("data/fixtures/probe_templates.json"),
        "--oracle-table",
        &repo_file(table),
        "--out",
        &path(dir, "probe"),
    ])
}

#[test]
fn probe_reports_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = probe(d.path(), "data/fixtures/probe_table_pm1.jsonl");
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["probe.md", "probe.json"] {
        let x = std::fs::read(a.path().join("probe").join(name)).unwrap();
        let y = std::fs::read(b.path().join("probe").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let md = std::fs::read_to_string(a.path().join("probe/probe.md")).unwrap();
    assert!(md.contains("| Constructed | 1.000* | -1.000* | 40 |"), "{md}");
}

#[test]
fn null_probe_has_no_significance() {
    let dir = tempfile::tempdir().unwrap();
    let out = probe(dir.path(), "data/fixtures/probe_table_null.jsonl");
    assert!(out.status.success(), "{}", stderr(&out));
    let md = std::fs::read_to_string(dir.path().join("probe/probe.md")).unwrap();
    assert!(md.contains("| Constructed | 0.000 | 0.000 | 40 |"), "{md}");
}

#[test]
fn dying_oracle_fails_without_partial_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairaudit(&[
        "probe",
        "--templates",
        &repo_file("data/fixtures/probe_templates.json"),
        "--oracle-cmd",
        "head -n 3 > /dev/null",
        "--out",
        &path(dir.path(), "probe"),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(!dir.path().join("probe/probe.md").exists());
}

#[test]
fn fill_prints_k_completions() {
    let out = fairaudit(&[
        "fill",
        "--text",
        "the patient is a [MASK]",
        "--k",
        "2",
        "--oracle-table",
        &repo_file("data/fixtures/fill_table.jsonl"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["man\t-0.6931", "woman\t-1.2040"]);
}

#[test]
fn report_without_inputs_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = path(dir.path(), "all.md");
    let out = fairaudit(&["report", "--out", &out_file]);
    assert!(out.status.success(), "{}", stderr(&out));
    let md = std::fs::read_to_string(out_file).unwrap();
    assert_eq!(md.lines().count(), 2, "{md}");
    assert!(md.starts_with("| task | attribute |"), "{md}");
}

fn epochs(report: &Path) -> Vec<(f64, f64)> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    v["training"]["epochs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["task_loss"].as_f64().unwrap(), e["task_accuracy"].as_f64().unwrap()))
        .collect()
}

#[test]
fn grl_demo_with_zero_lambda_tracks_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let config = path(dir.path(), "base.json");
    std::fs::write(
        &config,
        r#"{"architecture": {"discriminators": 0}, "training": {"epochs": 3}}"#,
    )
    .unwrap();
    let short = path(dir.path(), "short.json");
    std::fs::write(&short, r#"{"training": {"epochs": 3}}"#).unwrap();
    let base = fairaudit(&[
        "grl-demo",
        "--config",
        &config,
        "--lambda",
        "0",
        "--out",
        &path(dir.path(), "b"),
    ]);
    assert!(base.status.success(), "{}", stderr(&base));
    let zero = fairaudit(&[
        "grl-demo",
        "--config",
        &short,
        "--lambda",
        "0",
        "--out",
        &path(dir.path(), "z"),
    ]);
    assert!(zero.status.success(), "{}", stderr(&zero));
    let a = epochs(&dir.path().join("b/grl_report.json"));
    let b = epochs(&dir.path().join("z/grl_report.json"));
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
}

fn audit_run(dir: &Path, preds: &str, name: &str) -> PathBuf {
    let out_dir = dir.join(name);
    let out = fairaudit(&[
        "audit",
        "--predictions",
        preds,
        "--bootstrap-b",
        "200",
        "--seed",
        "3",
        "--out",
        &out_dir.to_string_lossy(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    out_dir
}

#[test]
fn cohort_audit_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let preds = path(dir.path(), "cohort.csv");
    let out = fairaudit(&["gen-cohort", "--tasks", "4", "--planted", "2", "--out", &preds]);
    assert!(out.status.success(), "{}", stderr(&out));
    let a = audit_run(dir.path(), &preds, "a");
    let b = audit_run(dir.path(), &preds, "b");
    for name in ["gaps.csv", "gaps.md", "summary.md", "thresholds.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let summary = std::fs::read_to_string(a.join("summary.md")).unwrap();
    assert!(summary.contains("1 (100%)"), "{summary}");

    let merged = path(dir.path(), "all.md");
    let out = fairaudit(&[
        "report",
        "--inputs",
        &a.join("gaps.csv").to_string_lossy(),
        "--out",
        &merged,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(std::fs::read_to_string(merged).unwrap().lines().count() > 2);
}
