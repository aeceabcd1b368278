use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proto_harness::config::{BackendKind, DatasetConfig, DatasetKind, RunConfig, ScoringSection};
use proto_harness::{build_report, cmd_report, cmd_run, cmd_score, CliError};
use proto_harness_core::prompt::VariantTag;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn mock_config(variant: VariantTag, repetitions: u32, out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.variant = variant;
    c.dataset.path = fixture("protoqa_dev5.jsonl");
    c.prompt.exemplars = Some(fixture("exemplars.jsonl"));
    c.backend.kind = BackendKind::Mock;
    c.backend.fixtures = Some(fixture("mock_dev5.jsonl"));
    c.run.repetitions = repetitions;
    c.run.output_dir = out.to_path_buf();
    c.run.seed_label = "cmd".into();
    c
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let body = format!(
        "variant = \"task_relevant\"\n\
         dataset.path = {:?}\n\
         prompt.exemplars = {:?}\n\
         backend.kind = \"mock\"\n\
         backend.fixtures = {:?}\n\
         run.repetitions = 1\n\
         run.output_dir = {:?}\n\
         {extra}\n",
        fixture("protoqa_dev5.jsonl"),
        fixture("exemplars.jsonl"),
        fixture("mock_dev5.jsonl"),
        dir.join("out"),
    );
    fs::write(&path, body).unwrap();
    path
}

fn harness() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proto-harness"))
}

fn block_on<F: std::future::Future>(f: F) -> F::Output {
    tokio::runtime::Runtime::new().unwrap().block_on(f)
}

#[test]
fn clean_run_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "");
    let out = harness().args(["run", "-c"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("out/report.txt").is_file());
    assert!(tmp.path().join("out/config.toml").is_file());
}

#[test]
fn invalid_config_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "run.parallelism = 0");
    let out = harness().args(["run", "-c"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let config = write_config(tmp.path(), "unknown_key = 3");
    let out = harness().args(["run", "-c"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn backend_failures_exit_two_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "");
    let out = harness()
        .args(["run", "-c"])
        .arg(&config)
        .arg("--set")
        .arg(format!("backend.fixtures={:?}", fixture("mock_binary10.jsonl").display().to_string()))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let failures = fs::read_to_string(tmp.path().join("out/rep-1/failures.jsonl")).unwrap();
    assert_eq!(failures.lines().count(), 5);
    assert!(failures.lines().all(|l| l.contains("\"kind\":\"backend\"")));
    // Failed questions still get an empty prediction line.
    let preds = fs::read_to_string(tmp.path().join("out/rep-1/predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 5);
}

#[test]
fn failures_do_not_change_exit_code_when_tolerated() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "run.fail_on_error = false");
    let out = harness()
        .args(["run", "-c"])
        .arg(&config)
        .arg("--set")
        .arg(format!("backend.fixtures={:?}", fixture("mock_binary10.jsonl").display().to_string()))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_prediction_id_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = tmp.path().join("preds.jsonl");
    fs::write(&preds, "{\"dev.1\": [\"cafe\"]}\n{\"nope\": [\"x\"]}\n").unwrap();
    let out = harness()
        .args(["score", "--predictions"])
        .arg(&preds)
        .arg("--dataset")
        .arg(fixture("protoqa_dev5.jsonl"))
        .arg("--out")
        .arg(tmp.path().join("scored"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn repetitions_multiply_calls_and_files() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = block_on(cmd_run(mock_config(VariantTag::EvidenceKnowledge, 3, tmp.path()))).unwrap();
    assert_eq!(summary.backend_calls, 3 * 5 * 2);
    for rep in 1..=3 {
        assert!(tmp.path().join(format!("rep-{rep}/predictions.jsonl")).is_file());
    }
    assert!(!tmp.path().join("rep-4").exists());
}

#[test]
fn diverse_path_makes_four_calls_per_question() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = block_on(cmd_run(mock_config(VariantTag::DiversePath, 1, tmp.path()))).unwrap();
    assert_eq!(summary.backend_calls, 20);
    assert!(summary.is_clean());
}

#[test]
fn report_orders_rows_by_variant_and_adds_appendix() {
    let tmp = tempfile::tempdir().unwrap();
    let later = tmp.path().join("later");
    let earlier = tmp.path().join("earlier");
    block_on(cmd_run(mock_config(VariantTag::DiversePath, 2, &later))).unwrap();
    block_on(cmd_run(mock_config(VariantTag::Baseline, 1, &earlier))).unwrap();
    let report = build_report(&[later.clone(), earlier.clone()]).unwrap();
    let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, [VariantTag::Baseline.label(), VariantTag::DiversePath.label()]);

    let text = cmd_report(&[later, earlier], Some(&tmp.path().join("cmp"))).unwrap();
    assert!(text.contains("Per repetition"));
    assert!(text.contains(&format!("{} rep-2", VariantTag::DiversePath.label())));
    assert_eq!(fs::read_to_string(tmp.path().join("cmp/report.txt")).unwrap(), text);
}

#[test]
fn runs_with_different_k_lists_are_incompatible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    block_on(cmd_run(mock_config(VariantTag::Baseline, 1, &a))).unwrap();
    let mut other = mock_config(VariantTag::Baseline, 1, &b);
    other.scoring.answers_k = vec![1, 2];
    block_on(cmd_run(other)).unwrap();
    let err = build_report(&[a, b]).unwrap_err();
    assert!(matches!(err, CliError::Scoring(ref m) if m.contains("incompatible")), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn report_reproduces_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = block_on(cmd_run(mock_config(VariantTag::EvidenceThinking, 2, tmp.path()))).unwrap();
    let text = cmd_report(&[tmp.path().to_path_buf()], None).unwrap();
    assert_eq!(text, summary.report_text);
    assert_eq!(fs::read_to_string(tmp.path().join("report.txt")).unwrap(), text);
}

#[test]
fn rescoring_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    block_on(cmd_run(mock_config(VariantTag::TaskRelevant, 1, &tmp.path().join("run")))).unwrap();
    let preds = tmp.path().join("run/rep-1/predictions.jsonl");
    let dataset = DatasetConfig {
        path: fixture("protoqa_dev5.jsonl"),
        kind: DatasetKind::Clustered,
    };
    let scoring = ScoringSection::default();
    for out in ["s1", "s2"] {
        cmd_score(&preds, &dataset, &scoring, 10, &tmp.path().join(out)).unwrap();
    }
    for f in ["scores.jsonl", "score_report.json", "score_report.txt"] {
        assert_eq!(fs::read(tmp.path().join("s1").join(f)).unwrap(), fs::read(tmp.path().join("s2").join(f)).unwrap());
    }
    // Rescoring matches the scores written during the run.
    assert_eq!(
        fs::read(tmp.path().join("s1/scores.jsonl")).unwrap(),
        fs::read(tmp.path().join("run/rep-1/scores.jsonl")).unwrap()
    );
}

#[test]
fn empty_predictions_score_zero_and_list_missing() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = tmp.path().join("empty.jsonl");
    fs::write(&preds, "").unwrap();
    let dataset = DatasetConfig {
        path: fixture("protoqa_dev5.jsonl"),
        kind: DatasetKind::Clustered,
    };
    let outcome = cmd_score(&preds, &dataset, &ScoringSection::default(), 10, tmp.path()).unwrap();
    assert_eq!(outcome.missing_predictions, ["dev.1", "dev.2", "dev.3", "dev.4", "dev.5"]);
    assert!(outcome.aggregate.max_answers.values().all(|&v| v == 0.0));
    assert!(outcome.aggregate.max_incorrect.values().all(|&v| v == 0.0));
    let text = fs::read_to_string(tmp.path().join("score_report.txt")).unwrap();
    assert!(text.contains("Missing predictions (5)"));
}
