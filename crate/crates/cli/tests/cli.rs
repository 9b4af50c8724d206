use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dygmf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dygmf")).args(args).current_dir(cwd).env_remove("DYGMF_LOG").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_cluster_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = dygmf(&["generate", "syn-fix", "--seed", "1", "--out", "data"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for t in 1..=10 {
        assert!(dir.join(format!("data/t{t:04}.edges")).exists());
        assert!(dir.join(format!("data/t{t:04}.labels")).exists());
    }
    let meta = json(&dir.join("data/meta.json"));
    assert_eq!((meta["generator"].as_str(), meta["seed"].as_u64(), meta["snapshots"].as_u64()), (Some("syn-fix"), Some(1), Some(10)));

    fs::write(dir.join("run.cfg"), "# sweep settings\nbeta = 0\nrestarts = 4\n").unwrap();
    let out = dygmf(&["cluster", "--input", "data", "--out", "pred", "--config", "run.cfg", "--beta", "20"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let result = json(&dir.join("pred/result.json"));
    // Named flags win over the config file, which wins over defaults.
    assert_eq!(result["config"]["beta"].as_f64(), Some(20.0));
    assert_eq!(result["config"]["restarts"].as_u64(), Some(4));
    for key in ["input", "config", "variant", "snapshots", "average", "timings", "total_seconds"] {
        assert!(result.get(key).is_some(), "result.json lacks {key}");
    }
    let snaps = result["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 10);
    for key in ["timestamp", "clusters", "objective", "metrics", "timings", "sweeps"] {
        assert!(snaps[0].get(key).is_some(), "snapshot report lacks {key}");
    }
    assert!(fs::read_to_string(dir.join("pred/run.log")).unwrap().contains("t=10 "));

    let out = dygmf(&["evaluate", "--pred", "pred", "--truth", "data", "--out", "scores.json"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let scores = json(&dir.join("scores.json"));
    assert_eq!(scores["snapshots"].as_array().unwrap().len(), 10);
    for key in ["nmi", "nf1", "modularity", "density"] {
        assert!(scores["average"][key].is_number(), "average lacks {key}");
    }
    assert!(scores["average"]["nmi"].as_f64().unwrap() >= 0.95);
}

#[test]
fn truth_scored_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&dygmf(&["generate", "syn-var", "--seed", "2", "--out", "data"], dir)), 0);
    fs::create_dir(dir.join("pred")).unwrap();
    for t in 1..=10 {
        fs::copy(dir.join(format!("data/t{t:04}.labels")), dir.join(format!("pred/t{t:04}.pred"))).unwrap();
    }
    let out = dygmf(&["evaluate", "--pred", "pred", "--truth", "data"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    for s in report["snapshots"].as_array().unwrap() {
        assert_eq!(s["nmi"].as_f64(), Some(1.0));
    }
}

#[test]
fn evaluate_reports_bad_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::create_dir_all(dir.join("empty_pred")).unwrap();
    fs::create_dir_all(dir.join("empty_truth")).unwrap();
    let out = dygmf(&["evaluate", "--pred", "empty_pred", "--truth", "empty_truth"], dir);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    assert_eq!(code(&dygmf(&["generate", "syn-fix", "--out", "data"], dir)), 0);
    let out = dygmf(&["evaluate", "--pred", "empty_pred", "--truth", "data"], dir);
    assert_eq!(code(&out), 2);
    fs::create_dir(dir.join("short")).unwrap();
    for t in 1..=3 {
        fs::copy(dir.join(format!("data/t{t:04}.labels")), dir.join(format!("short/t{t:04}.pred"))).unwrap();
    }
    let out = dygmf(&["evaluate", "--pred", "short", "--truth", "data"], dir);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("3 prediction files") && msg.contains("10 snapshots"), "{msg}");
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = dygmf(&["generate", "syn-fix"], dir);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--out"));
    assert_eq!(code(&dygmf(&["frobnicate"], dir)), 2);
    assert_eq!(code(&dygmf(&["generate", "green", "--event", "teleport", "--out", "x"], dir)), 2);
    assert_eq!(code(&dygmf(&["cluster", "--input", "missing", "--out", "o"], dir)), 2);
    assert_eq!(code(&dygmf(&["generate", "syn-fix", "--out", "data"], dir)), 0);
    assert_eq!(code(&dygmf(&["cluster", "--input", "data", "--out", "o", "--mu", "2"], dir)), 2);
    assert_eq!(code(&dygmf(&["cluster", "--input", "data", "--out", "o", "--set", "nonsense=1"], dir)), 2);
    assert_eq!(code(&dygmf(&["cluster", "--input", "data", "--out", "o", "--no-bcr", "--no-seu"], dir)), 2);
}

#[test]
fn runtime_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::create_dir(dir.join("bad")).unwrap();
    fs::write(dir.join("bad/t0001.edges"), "0 1\n1 1\n").unwrap();
    let out = dygmf(&["cluster", "--input", "bad", "--out", "o"], dir);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("self-loop"), "{}", stderr(&out));
}

#[test]
fn noise_adds_the_requested_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&dygmf(&["generate", "syn-fix", "--out", "data"], dir)), 0);
    let out = dygmf(&["noise", "--input", "data", "--out", "noisy", "--fraction", "0.1", "--seed", "4"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (before, after) = (json(&dir.join("data/meta.json")), json(&dir.join("noisy/meta.json")));
    assert!(after["edges"].as_u64() > before["edges"].as_u64());
    assert_eq!(after["noise_fraction"].as_f64(), Some(0.1));
    assert!(dir.join("noisy/t0010.labels").exists());
    assert_eq!(code(&dygmf(&["noise", "--input", "data", "--out", "x", "--fraction", "2"], dir)), 2);
}

#[test]
fn bench_writes_pinned_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = dygmf(
        &["bench", "--dataset", "syn-fix", "--sweep", "ablation", "--values", "full,no-bcr", "--reps", "2", "--jobs", "2", "--out", "b", "--set", "restarts=3"],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("b/bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,value,runs,failed,nmi_mean,nmi_std,nf1_mean,nf1_std,seconds_mean,seconds_std");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("ablation,full,2,0,") && lines[2].starts_with("ablation,no-bcr,2,0,"));
    let report = json(&dir.join("b/bench.json"));
    assert_eq!(report["report"]["cells"].as_array().unwrap().len(), 4);
    assert_eq!(report["spec"]["repetitions"].as_u64(), Some(2));
    assert_eq!(code(&dygmf(&["bench", "--dataset", "syn-fix", "--sweep", "noise", "--values", "0", "--reps", "0", "--out", "c"], dir)), 2);
}
