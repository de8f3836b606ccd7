//! End-to-end tests of the `oltr` binary: artifact sets, exit codes, and
//! the pinned CSV formats.

use std::path::Path;
use std::process::{Command, Output};

use oltr_core::experiment::ExperimentConfig;

fn oltr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oltr"))
}

/// Flags for a deliberately tiny run (fractions of a second).
fn tiny_flags(out_dir: &Path) -> Vec<String> {
    [
        "--k",
        "3",
        "--pool-size",
        "10",
        "--batches",
        "4",
        "--batch-size",
        "5",
        "--queries",
        "4",
        "--items",
        "300",
        "--dim",
        "8",
        "--min-relevant",
        "3",
        "--hidden",
        "8",
        "--offline-batches",
        "2",
        "--offline-batch-size",
        "5",
        "--baseline-draws",
        "200",
        "--seed",
        "7",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--out-dir".to_string(), out_dir.display().to_string()])
    .collect()
}

fn run(command: &mut Command) -> Output {
    command.output().expect("failed to launch oltr")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn train_writes_the_full_artifact_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = run(oltr()
        .arg("train")
        .args(["--learner", "reglearn"])
        .args(tiny_flags(&out)));
    assert!(output.status.success(), "{}", stderr_text(&output));

    let curve = read(&out.join("learning_curve.csv"));
    let mut lines = curve.lines();
    assert_eq!(
        lines.next().unwrap(),
        "batch,mean_ndcg,running_ndcg,loss,w_1,w_2,w_3"
    );
    assert_eq!(lines.count(), 4, "one row per batch");

    let weights = read(&out.join("weights.csv"));
    assert!(weights.starts_with("position,learned_w,ground_truth_w\n"));
    assert_eq!(weights.lines().count(), 4, "header plus one row per position");

    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    let config: ExperimentConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    assert_eq!(config.k, 3);
    assert_eq!(config.seed, 7);
    assert!(summary["offline"]["mean_ndcg"].as_f64().unwrap().is_finite());
    assert_eq!(summary["weights"]["learned"].as_array().unwrap().len(), 3);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert!(manifest["error"].is_null());
    let outputs = manifest["outputs"].as_array().unwrap();
    for file in outputs {
        assert!(
            out.join(file.as_str().unwrap()).exists(),
            "manifest lists missing file {file}"
        );
    }
    for name in [
        "learning_curve.csv",
        "weights.csv",
        "summary.json",
        "checkpoint.json",
        "manifest.json",
    ] {
        assert!(
            outputs.iter().any(|f| f == name),
            "{name} not listed in manifest"
        );
    }
}

#[test]
fn click_feedback_with_too_long_lists_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = run(oltr()
        .arg("train")
        .args(["--feedback", "clicks", "--k", "7", "--pool-size", "12"])
        .args(["--out-dir", &out.display().to_string()]));
    assert_eq!(output.status.code(), Some(2));
    let stderr = stderr_text(&output);
    assert!(
        stderr.contains("positions"),
        "error must name the constraint: {stderr}"
    );
}

#[test]
fn zero_batches_reports_the_untrained_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut flags = tiny_flags(&out);
    let batches_value = flags.iter().position(|f| f == "--batches").unwrap() + 1;
    flags[batches_value] = "0".to_string();
    let output = run(oltr().arg("train").args(&flags));
    assert!(output.status.success(), "{}", stderr_text(&output));

    let curve = read(&out.join("learning_curve.csv"));
    assert_eq!(curve.lines().count(), 1, "header only, no batches");
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["online"]["interactions"], 0);
    assert!(summary["offline"]["mean_ndcg"].as_f64().unwrap() > 0.0);
    assert!(summary["random_baseline"].as_f64().unwrap() > 0.0);
}

#[test]
fn runs_are_reproducible_from_their_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let (first, second) = (dir.path().join("a"), dir.path().join("b"));
    let output = run(oltr().arg("train").args(tiny_flags(&first)));
    assert!(output.status.success(), "{}", stderr_text(&output));

    let output = run(oltr().arg("train").args([
        "--config",
        &first.join("summary.json").display().to_string(),
        "--out-dir",
        &second.display().to_string(),
    ]));
    assert!(output.status.success(), "{}", stderr_text(&output));

    assert_eq!(
        read(&first.join("learning_curve.csv")),
        read(&second.join("learning_curve.csv")),
        "a summary's config echo must reproduce the run bit for bit"
    );
    assert_eq!(
        read(&first.join("checkpoint.json")),
        read(&second.join("checkpoint.json"))
    );
}

#[test]
fn comparing_a_run_with_itself_gives_p_one_and_no_marker() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = run(oltr().arg("train").args(tiny_flags(&out)));
    assert!(output.status.success(), "{}", stderr_text(&output));

    let summary = out.join("summary.json").display().to_string();
    let cmp_dir = dir.path().join("cmp");
    let output = run(oltr()
        .arg("compare")
        .args([&summary, &summary])
        .args(["--out-dir", &cmp_dir.display().to_string()]));
    assert!(output.status.success(), "{}", stderr_text(&output));

    let csv = read(&cmp_dir.join("compare.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "config,mean,std,p_vs_best,significant");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "row arity: {line}");
        assert_eq!(fields[3], "1", "self-comparison p-value: {line}");
        assert_eq!(fields[4], "", "no significance marker: {line}");
    }
}

#[test]
fn compare_rejects_mismatched_list_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let output = run(oltr().arg("train").args(tiny_flags(&a)));
    assert!(output.status.success(), "{}", stderr_text(&output));
    let mut flags = tiny_flags(&b);
    let k_value = flags.iter().position(|f| f == "--k").unwrap() + 1;
    flags[k_value] = "2".to_string();
    let output = run(oltr().arg("train").args(&flags));
    assert!(output.status.success(), "{}", stderr_text(&output));

    let output = run(oltr()
        .arg("compare")
        .args([
            a.join("summary.json").display().to_string(),
            b.join("summary.json").display().to_string(),
        ])
        .args(["--out-dir", &dir.path().join("cmp").display().to_string()]));
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_text(&output).contains("list length"));
}

#[test]
fn weights_reads_checkpoints_and_rejects_non_reglearn_ones() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("reg");
    let output = run(oltr().arg("train").args(tiny_flags(&reg)));
    assert!(output.status.success(), "{}", stderr_text(&output));

    let w_dir = dir.path().join("w");
    let output = run(oltr().arg("weights").args([
        "--checkpoint",
        &reg.join("checkpoint.json").display().to_string(),
        "--out-dir",
        &w_dir.display().to_string(),
    ]));
    assert!(output.status.success(), "{}", stderr_text(&output));
    let csv = read(&w_dir.join("weights.csv"));
    assert!(csv.starts_with("position,learned_w,ground_truth_w\n"));
    // nDCG ground truth column: 1, 1/log2(3), 1/2.
    let second_row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(second_row[2], "1");
    let third_row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(third_row[2], (1.0_f64 / 3.0_f64.log2()).to_string());

    let pg = dir.path().join("pg");
    let output = run(oltr()
        .arg("train")
        .args(["--learner", "pglearn"])
        .args(tiny_flags(&pg)));
    assert!(output.status.success(), "{}", stderr_text(&output));
    let output = run(oltr().arg("weights").args([
        "--checkpoint",
        &pg.join("checkpoint.json").display().to_string(),
        "--out-dir",
        &dir.path().join("w2").display().to_string(),
    ]));
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_text(&output).contains("reglearn"));
}

#[test]
fn a_diverging_run_exits_1_and_leaves_a_manifest_with_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = run(oltr()
        .arg("train")
        .args(["--lr", "1e100"])
        .args(tiny_flags(&out)));
    assert_eq!(output.status.code(), Some(1));

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    let error = manifest["error"].as_str().unwrap();
    assert!(!error.is_empty());
    // The partial learning curve is preserved and listed.
    assert!(out.join("learning_curve.csv").exists());
    assert!(manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f == "learning_curve.csv"));
}
