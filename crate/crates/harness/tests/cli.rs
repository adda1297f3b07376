use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use choice_envs::dataset::Dataset;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choice-harness"))
        .args(args)
        .output()
        .expect("harness binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY: &[&str] = &["--task", "fork", "--episodes", "16", "--epochs", "2", "--k", "3", "--eval-episodes", "6"];

/// `cmd` with the tiny settings, overridden by any flag repeated in `extra`.
fn with<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    for pair in TINY.chunks(2) {
        if !extra.contains(&pair[0]) {
            v.extend_from_slice(pair);
        }
    }
    v.extend_from_slice(extra);
    v
}

/// Data rows of a CSV artifact (header comment and column line dropped).
fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(2).map(str::to_string).collect()
}

#[test]
fn generate_data_is_bimodal_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["generate-data", "--task", "fork", "--episodes", "100", "--seed", "7", "--out", p(out)]);
    }
    let text = fs::read(a.join("dataset.jsonl")).unwrap();
    assert_eq!(text, fs::read(b.join("dataset.jsonl")).unwrap());
    let data = Dataset::parse(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(data.episodes.len(), 100);
    let counts = data.mode_counts(2);
    assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
}

#[test]
fn invalid_configuration_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&["generate-data", "--task", "fork", "--episodes", "0", "--out", p(&out)]), 2);
    assert_eq!(code(&["generate-data", "--task", "maze", "--out", p(&out)]), 2);
    assert_eq!(code(&["generate-data", "--selection", "best", "--out", p(&out)]), 2);
    assert_eq!(code(&["train", "--no-such-flag"]), 2);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "task = fork\nlearning-rate = 3\n").unwrap();
    assert_eq!(code(&["generate-data", "--config", p(&cfg), "--out", p(&out)]), 2);
    assert!(!out.exists());
}

#[test]
fn missing_input_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&with("train", &["--out", p(dir.path())])), 3);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate-data", "--task", "phased", "--episodes", "5", "--seed", "3", "--out", p(&a)]);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small phased run\ntask = phased\nepisodes = 5\nseed = 3\nk = 9\n").unwrap();
    // flags win over the file
    ok(&["generate-data", "--config", p(&cfg), "--k", "5", "--out", p(&b)]);
    assert_eq!(
        fs::read(a.join("dataset.jsonl")).unwrap(),
        fs::read(b.join("dataset.jsonl")).unwrap()
    );
}

#[test]
fn scripted_policy_always_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    for task in ["fork", "phased", "wipe"] {
        let out = dir.path().join(task);
        ok(&["eval", "--task", task, "--algo", "scripted", "--eval-episodes", "20", "--out", p(&out)]);
        let rows = csv_rows(&out.join("metrics.csv"));
        assert_eq!(rows.len(), 1);
        let fields: Vec<&str> = rows[0].split(',').collect();
        assert_eq!(&fields[..3], &["scripted", "20", "20"], "{task}");
    }
}

#[test]
fn train_eval_ablate_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&with("generate-data", &["--out", p(&out)]));
    ok(&with("train", &["--out", p(&out)]));
    let loss = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 2 + 2);

    ok(&with("eval", &["--out", p(&out)]));
    assert_eq!(csv_rows(&out.join("metrics.csv")).len(), 1);
    assert!(fs::read_to_string(out.join("metrics.txt")).unwrap().contains("calibration spearman"));

    ok(&with("ablate", &["--out", p(&out)]));
    let rows = csv_rows(&out.join("metrics.csv"));
    let labels: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["score", "random", "mean", "single:0", "single:1", "single:2"]);
    let heads = csv_rows(&out.join("heads.csv"));
    assert_eq!(heads.len(), 6 * 3 * 3);

    let report = dir.path().join("report");
    ok(&["report", "--rollouts", p(&out.join("rollouts.jsonl")), "--out", p(&report)]);
    for f in ["metrics.txt", "metrics.csv", "heads.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(report.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn checkpoints_from_other_configurations_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&with("generate-data", &["--out", p(&out)]));
    ok(&with("train", &["--out", p(&out)]));
    // training settings changed: same shapes, different model hash
    let stale = run(&with("eval", &["--out", p(&out), "--epochs", "3"]));
    assert_eq!(stale.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&stale.stderr).contains("different configuration"));
    // dataset produced under another seed
    assert_eq!(code(&with("train", &["--out", p(&out), "--seed", "1"])), 3);
    // shapes that cannot fit the model
    let shapes = run(&with("eval", &["--out", p(&out), "--task", "phased"]));
    assert_eq!(shapes.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&shapes.stderr).contains("does not fit"));
    assert_eq!(code(&with("eval", &["--out", p(&out), "--k", "4"])), 2);
    assert_eq!(code(&with("eval", &["--out", p(&out), "--algo", "bc"])), 2);
    // ablation needs a choice model
    assert_eq!(code(&with("ablate", &["--out", p(&out), "--algo", "scripted"])), 2);
}

#[test]
fn bench_latency_reports_each_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (c, b) = (dir.path().join("choice"), dir.path().join("bc"));
    let data = c.join("dataset.jsonl");
    ok(&with("generate-data", &["--out", p(&c)]));
    ok(&with("train", &["--out", p(&c)]));
    ok(&with("train", &["--out", p(&b), "--algo", "bc", "--data", p(&data)]));
    ok(&with(
        "bench-latency",
        &[
            "--out",
            p(dir.path()),
            "--calls",
            "50",
            "--checkpoint",
            p(&c.join("checkpoint.json")),
            "--checkpoint",
            p(&b.join("checkpoint.json")),
        ],
    ));
    let rows = csv_rows(&dir.path().join("latency.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",choice,50,") && rows[1].contains(",bc,50,"), "{rows:?}");
}
