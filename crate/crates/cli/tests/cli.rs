use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn spectral-lab")
}

const DIAG4: &str = r#"{"kind": "finite_matrix",
    "h0": [[[1,0],[0,0],[0,0],[0,0]],[[0,0],[2,0],[0,0],[0,0]],[[0,0],[0,0],[3,0],[0,0]],[[0,0],[0,0],[0,0],[4,0]]],
    "f": [[[1,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[1,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]]]}"#;

fn write_config(dir: &Path, lambdas: &str, extra: &str) -> String {
    let text = format!(
        r#"{{"schema": "spectral-lab/experiment/v1", "model": {DIAG4},
            "lambda_grid": {lambdas}, "output_dir": "report"{extra}}}"#
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn verdicts(dir: &Path) -> Vec<serde_json::Value> {
    let text = fs::read_to_string(dir.join("verdicts.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn validate_accepts_a_good_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.5]", "");
    let out = run(&["validate", &cfg]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
    assert!(!tmp.path().join("report").exists());
}

#[test]
fn run_writes_report_for_a_regular_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.5]", "");
    let out = run(&["run", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = tmp.path().join("report");
    let v = verdicts(&report);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0]["status"]["kind"], "regular");
    assert!(report.join("traces/probe_000.csv").exists());
    assert!(report.join("plots/point_000.svg").exists());
}

#[test]
fn malformed_config_exits_one_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("config.json");
    fs::write(
        &path,
        r#"{"schema": "spectral-lab/experiment/v1", "lambda_grid": ["#,
    )
    .unwrap();
    let out = run(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("report").exists());
    assert!(!tmp.path().join("spectral-lab-report").exists());

    let cfg = write_config(tmp.path(), "[0.5]", r#", "unknown_field": 1"#);
    assert_eq!(run(&["validate", &cfg]).status.code(), Some(1));
}

#[test]
fn unresolved_point_exits_two() {
    // one weight: the trace blows up but never reaches n_max = 2 escaping
    // eigenvalues, and there is no witness to try
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{"schema": "spectral-lab/experiment/v1",
        "model": {"kind": "scalar_compact", "lambda0": 0.0, "weights": [1.0]},
        "lambda_grid": [0.0], "n_max": 2, "s_grid": [0.0],
        "witnesses": {"random_count": 0}, "output_dir": "report"}"#;
    let path = tmp.path().join("config.json");
    fs::write(&path, text).unwrap();
    let out = run(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = verdicts(&tmp.path().join("report"));
    assert_eq!(v[0]["status"]["kind"], "inconclusive");
}

#[test]
fn out_and_seed_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[1.0]",
        r#", "s_grid": [0.0], "witnesses": {"random_count": 2}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert!(run(&[
        "run",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--seed",
        "5",
        "--jobs",
        "1"
    ])
    .status
    .success());
    assert!(run(&[
        "run",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "5",
        "--jobs",
        "3"
    ])
    .status
    .success());
    assert!(
        run(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "6"])
            .status
            .success()
    );
    assert!(!tmp.path().join("report").exists());
    let bytes = |d: &Path| fs::read(d.join("verdicts.json")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let v = verdicts(&a);
    assert_eq!(v[0]["status"]["kind"], "semi_regular");
    assert_eq!(v[0]["status"]["witness"]["seed"], 5);
    assert_eq!(verdicts(&c)[0]["status"]["witness"]["seed"], 6);
}

#[test]
fn zero_jobs_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.5]", "");
    let out = run(&["run", &cfg, "--jobs", "0"]);
    assert!(!out.status.success());
    assert!(!tmp.path().join("report").exists());
}

#[test]
fn plot_redraws_from_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.5, 2.5]", "");
    assert!(run(&["run", &cfg]).status.success());
    let plots = tmp.path().join("report/plots");
    fs::remove_dir_all(&plots).unwrap();
    let out = run(&["plot", tmp.path().join("report").to_str().unwrap()]);
    assert!(out.status.success());
    let svg = fs::read_to_string(plots.join("point_001.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("lambda = 2.5"));

    let missing = run(&["plot", tmp.path().join("nowhere").to_str().unwrap()]);
    assert!(!missing.status.success());
}
