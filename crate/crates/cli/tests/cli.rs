//! End-to-end runs of the `complabel` binary.

use std::path::Path;
use std::process::{Command, Output};

fn complabel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_complabel")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_passes_and_reports_counts() {
    let out = complabel(&["check"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    for name in ["symmetry", "theorem2-sum", "theorem2-pairing", "theorem1-identity", "objective-gradients"] {
        assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{name} missing:\n{text}");
    }
    assert!(text.contains("8 properties run, 8 passed, 0 failed"));
}

const SMALL: &[&str] =
    &["--train-per-class", "40", "--test-per-class", "40", "--iterations", "200", "--lambda-grid", "1e-4,1e-2"];

#[test]
fn bench_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in 0..2 {
        let out_file = dir.path().join(format!("run{run}.csv"));
        let mut args = vec![
            "bench",
            "--dataset",
            "synth:k=3,d=2,sep=3",
            "--scheme",
            "pc,ova,ml,pl",
            "--loss",
            "sigmoid",
            "--trials",
            "3",
            "--seed",
            "5",
            "--out",
            path(&out_file),
        ];
        args.extend_from_slice(SMALL);
        let out = complabel(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("| pc/sigmoid"));
        files.push(std::fs::read(&out_file).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let csv = String::from_utf8(files.remove(0)).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(4).unwrap().starts_with("pl/squared-hinge,synth-k3-d2-sep3,1-3,3,"));
}

#[test]
fn synth_csv_round_trips_through_bench() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let out = complabel(&["synth", "--k", "4", "--per-class", "100", "--out", path(&data)]);
    assert!(out.status.success());
    let header = std::fs::read_to_string(&data).unwrap();
    assert!(header.starts_with("x1,x2,label\n"));

    let mut args = vec!["bench", "--dataset", path(&data), "--label-col", "label", "--classes", "2-4", "--trials", "1"];
    args.extend_from_slice(SMALL);
    let out = complabel(&args);
    let text = stdout(&out);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("| data ") && text.contains("2-4"), "{text}");
}

#[test]
fn manifest_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("run.json");
    let out_file = dir.path().join("res.csv");
    std::fs::write(
        &manifest,
        r#"{"command": "combine",
            "dataset": {"kind": "synth", "classes": 3, "dim": 2, "separation": 3.0},
            "methods": ["pc/sigmoid"],
            "train_per_class": 60, "test_per_class": 30, "trials": 2,
            "training": {"iterations": 150, "lambda_grid": [0.0001]}}"#,
    )
    .unwrap();
    let out = complabel(&["combine", "--manifest", path(&manifest), "--trials", "1", "--out", path(&out_file)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_file).unwrap();
    let methods: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["OL", "CL", "OL&CL"]);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(3) == Some("1")));

    let out = complabel(&["bench", "--manifest", path(&manifest)]);
    assert!(!out.status.success());
}

#[test]
fn bounds_table() {
    let out = complabel(&["bounds", "--k", "3", "--loss", "sigmoid", "--rademacher", "0.1", "--n", "100,1000"]);
    let text = stdout(&out);
    assert!(out.status.success());
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row[..2], ["100", "0.100000"]);
    assert_eq!(row[2], "0.843241");
    assert_eq!(row[4], "1.743241");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn errors_exit_nonzero_with_context() {
    let out = complabel(&["bench", "--dataset", "/no/such/file.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    let out = complabel(&["bench", "--dataset", "synth", "--scheme", "pc", "--loss", "hinge"]);
    assert!(!out.status.success());

    let out = complabel(&["bench", "--dataset", "synth", "--alpha", "0.5"]);
    assert!(!out.status.success());

    let out = complabel(&["bounds", "--k", "1"]);
    assert!(!out.status.success());
}
