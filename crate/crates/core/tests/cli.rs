use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dynmeans(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynmeans"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const PARAMS: [&str; 6] = ["--lambda", "0.04", "--n-q", "6.8", "--k-tau", "1.01"];

fn generate(dir: &Path, seed: &str, steps: &str) {
    let out = dynmeans(
        dir,
        &[
            "generate",
            "--seed",
            seed,
            "--steps",
            steps,
            "-o",
            "data.jsonl",
            "--truth",
            "truth.jsonl",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn json_lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn help_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&dynmeans(dir.path(), &["--help"])), 0);
    assert_eq!(code(&dynmeans(dir.path(), &[])), 1);
    assert_eq!(code(&dynmeans(dir.path(), &["cluster", "--bogus"])), 1);
    let out = dynmeans(
        dir.path(),
        &["generate", "--death-prob", "2", "-o", "a", "--truth", "b"],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--death-prob"));
}

#[test]
fn mixed_parameter_forms_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "1", "3");
    let base = [
        "cluster",
        "-i",
        "data.jsonl",
        "-o",
        "r.jsonl",
        "--lambda",
        "0.04",
    ];
    for extra in [
        &["--n-q", "6.8", "--tau", "0.2"][..],
        &["--q", "0.01", "--k-tau", "1.01"],
        &["--n-q", "6.8"],
        &["--q", "0.01"],
        &[],
    ] {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        let out = dynmeans(dir.path(), &args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
    }
    let out = dynmeans(
        dir.path(),
        &[
            "cluster",
            "-i",
            "data.jsonl",
            "-o",
            "r.jsonl",
            "--lambda",
            "0.04",
            "--n-q",
            "1",
            "--k-tau",
            "1.01",
        ],
    );
    assert_eq!(code(&out), 1);
    let out = dynmeans(
        dir.path(),
        &[
            "cluster",
            "-i",
            "data.jsonl",
            "-o",
            "r.jsonl",
            "--lambda",
            "0.04",
            "--q",
            "0.01",
            "--tau",
            "0.2",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"t\":0,\"points\":[[0.1,0.2]]}\n{\"t\":1,\"points\":[[0.1,0.2]]}\n{\"t\":2,\"points\":[[0.1]\n",
    )
    .unwrap();
    let mut args = vec!["cluster", "-i", "bad.jsonl", "-o", "r.jsonl"];
    args.extend(PARAMS);
    let out = dynmeans(dir.path(), &args);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    // dimension change is also malformed input
    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"t\":0,\"points\":[[0.1,0.2]]}\n{\"t\":1,\"points\":[[0.1]]}\n",
    )
    .unwrap();
    let out = dynmeans(dir.path(), &args);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    // timesteps must increase
    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"t\":1,\"points\":[]}\n{\"t\":1,\"points\":[]}\n",
    )
    .unwrap();
    let out = dynmeans(dir.path(), &args);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let mut missing = vec!["cluster", "-i", "nope.jsonl", "-o", "r.jsonl"];
    missing.extend(PARAMS);
    assert_eq!(code(&dynmeans(dir.path(), &missing)), 2);
}

#[test]
fn empty_input_gives_header_only_result() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let mut args = vec!["cluster", "-i", "empty.jsonl", "-o", "r.jsonl"];
    args.extend(PARAMS);
    let out = dynmeans(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines = json_lines(&dir.path().join("r.jsonl"));
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["kind"], "header");
    assert_eq!(lines[0]["q"].as_f64().unwrap(), 0.0058823529411764705);
    assert_eq!(lines[0]["tau"].as_f64().unwrap(), 0.18413793103448278);
}

#[test]
fn iteration_cap_exits_3_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "2", "10");
    let mut args = vec![
        "--no-timing",
        "cluster",
        "-i",
        "data.jsonl",
        "-o",
        "r.jsonl",
        "--max-iters",
        "1",
    ];
    args.extend(PARAMS);
    let out = dynmeans(dir.path(), &args);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let lines = json_lines(&dir.path().join("r.jsonl"));
    assert_eq!(lines.len(), 11);
    assert!(lines[1..].iter().any(|s| s["converged"] == false));
}

#[test]
fn generate_cluster_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "3", "25");
    let mut args = vec![
        "cluster",
        "-i",
        "data.jsonl",
        "-o",
        "r.jsonl",
        "--csv",
        "labels.csv",
        "--restarts",
        "3",
    ];
    args.extend(PARAMS);
    let out = dynmeans(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let labels = fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    assert_eq!(labels.lines().next(), Some("t,point,label"));
    assert_eq!(labels.lines().count(), 1 + 25 * 5 * 15);

    let out = dynmeans(
        dir.path(),
        &[
            "eval",
            "--truth",
            "truth.jsonl",
            "--result",
            "r.jsonl",
            "--csv",
            "eval.csv",
            "--per-step",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let tracked: f64 = row[2].parse().unwrap();
    let untracked: f64 = row[3].parse().unwrap();
    assert!(0.0 < tracked && tracked <= untracked && untracked <= 1.0);

    // result against the wrong truth length is an input error
    generate(dir.path(), "3", "5");
    let out = dynmeans(
        dir.path(),
        &["eval", "--truth", "truth.jsonl", "--result", "r.jsonl"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn single_point_sweep_matches_cluster_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynmeans(
        dir.path(),
        &[
            "--no-timing",
            "sweep",
            "--steps",
            "30",
            "--lambda",
            "0.05",
            "--n-q",
            "4",
            "--k-tau",
            "1.5",
            "--restarts",
            "2",
            "--trials",
            "1",
            "--seed",
            "9",
            "-o",
            "sweep.jsonl",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = json_lines(&dir.path().join("sweep.jsonl"));
    assert_eq!(rows.len(), 1);

    generate(dir.path(), "9", "30");
    let out = dynmeans(
        dir.path(),
        &[
            "cluster",
            "-i",
            "data.jsonl",
            "-o",
            "r.jsonl",
            "--lambda",
            "0.05",
            "--n-q",
            "4",
            "--k-tau",
            "1.5",
            "--restarts",
            "2",
            "--seed",
            "9",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = dynmeans(
        dir.path(),
        &[
            "eval",
            "--truth",
            "truth.jsonl",
            "--result",
            "r.jsonl",
            "--csv",
            "eval.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(
        rows[0]["tracked_mean"].as_f64().unwrap(),
        row[2].parse::<f64>().unwrap()
    );
    assert_eq!(
        rows[0]["untracked_mean"].as_f64().unwrap(),
        row[3].parse::<f64>().unwrap()
    );
}

#[test]
fn sweep_grid_and_fixed_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynmeans(
        dir.path(),
        &[
            "--no-timing",
            "sweep",
            "--steps",
            "10",
            "--lambda",
            "0.02:0.06:3",
            "--n-q",
            "6.8",
            "--k-tau",
            "1.01,2,4",
            "--restarts",
            "1",
            "--trials",
            "2",
            "--csv",
            "grid.csv",
            "--threads",
            "2",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[0].starts_with("lambda,n_q,k_tau,q,tau,restarts,trials,tracked_mean"));
    assert!(lines[1].starts_with("0.02,6.8,1.01,"));
    assert!(lines[9].starts_with("0.06,6.8,4.0,"));

    generate(dir.path(), "4", "10");
    let out = dynmeans(
        dir.path(),
        &[
            "sweep",
            "-i",
            "data.jsonl",
            "--truth",
            "truth.jsonl",
            "--lambda",
            "0.04",
            "--n-q",
            "6.8",
            "--k-tau",
            "1.01",
            "--restarts",
            "1,3",
            "--trials",
            "2",
            "-o",
            "fixed.jsonl",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json_lines(&dir.path().join("fixed.jsonl")).len(), 2);

    let out = dynmeans(
        dir.path(),
        &[
            "sweep",
            "-i",
            "data.jsonl",
            "--lambda",
            "0.04",
            "--n-q",
            "6.8",
            "--k-tau",
            "1.01",
        ],
    );
    assert_eq!(code(&out), 1);
    let out = dynmeans(
        dir.path(),
        &[
            "sweep", "--lambda", "0.04", "--n-q", "0.5", "--k-tau", "1.01",
        ],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn default_sizes() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "1", "100");
    let batches = json_lines(&dir.path().join("data.jsonl"));
    assert_eq!(batches.len(), 100);
    assert!(batches
        .iter()
        .all(|b| b["points"].as_array().unwrap().len() == 75));
    assert_eq!(json_lines(&dir.path().join("truth.jsonl")).len(), 100);

    let mut args = vec![
        "cluster",
        "-i",
        "data.jsonl",
        "-o",
        "r.jsonl",
        "--restarts",
        "3",
    ];
    args.extend(PARAMS);
    let out = dynmeans(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let result = json_lines(&dir.path().join("r.jsonl"));
    assert_eq!(result.len(), 101);
    assert!(result[1..]
        .iter()
        .all(|s| s["kind"] == "step" && s["labels"].as_array().unwrap().len() == 75));

    let out = dynmeans(
        dir.path(),
        &["eval", "--truth", "truth.jsonl", "--result", "truth.jsonl"],
    );
    assert_eq!(code(&out), 2, "truth is not a result file");

    generate(dir.path(), "1", "1");
    assert_eq!(json_lines(&dir.path().join("data.jsonl")).len(), 1);
}
