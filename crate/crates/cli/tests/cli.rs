//! End-to-end tests of the `qslab` binary: exit codes, file outputs, and
//! cross-thread-count determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qslab"))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

const COS_COS: &str = r#"{"d": 2, "n": 1, "coefficients": [0.0, 1.0, 0.0, 1.0, 0.0]}"#;
const COS_1D: &str = r#"{"d": 1, "n": 1, "coefficients": [0.0, 1.0, 0.0]}"#;
const ZERO_2D: &str = r#"{"d": 2, "n": 1, "coefficients": [0.0, 0.0, 0.0, 0.0, 0.0]}"#;
const GOLDEN: &str = "0.6180339887498949";

#[test]
fn dim_prints_the_count() {
    let out = qslab().args(["dim", "--d", "2", "--n", "2"]).output().unwrap();
    assert_eq!(exit_code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "13");

    let out = qslab().args(["dim", "--d", "3", "--n", "0"]).output().unwrap();
    assert_eq!(exit_code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1");
}

#[test]
fn dim_rejects_zero_dimension() {
    let out = qslab().args(["dim", "--d", "0", "--n", "1"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn classify_verdict_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let coscos = write_file(dir.path(), "coscos.json", COS_COS);
    let zero = write_file(dir.path(), "zero.json", ZERO_2D);
    let truncated = write_file(dir.path(), "broken.json", &COS_COS[..30]);

    // cos+cos is never a fail: 0 (pass) or 4 (inconclusive)
    let out = qslab()
        .args(["classify"])
        .arg(&coscos)
        .args(["--skip-cartan"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 4, "skip-cartan caps the verdict at inconclusive");

    let out = qslab().args(["classify"]).arg(&zero).output().unwrap();
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("constant"));

    let out = qslab().args(["classify"]).arg(&truncated).output().unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn spectrum_free_coupling_is_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cos = write_file(dir.path(), "cos.json", COS_1D);
    let out = qslab()
        .arg("--out-dir")
        .arg(dir.path().join("runs"))
        .args(["spectrum"])
        .arg(&cos)
        .args([
            "--lambda", "0", "--omega", GOLDEN, "--l", "1000", "--phases", "20",
            "--resolution", "0.01",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("\"is_interval\": true"));
}

#[test]
fn spectrum_strong_coupling_finds_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let cos = write_file(dir.path(), "cos.json", COS_1D);
    let runs = dir.path().join("runs");
    let out = qslab()
        .arg("--out-dir")
        .arg(&runs)
        .args(["spectrum"])
        .arg(&cos)
        .args([
            "--lambda", "5", "--omega", GOLDEN, "--l", "600", "--phases", "6",
            "--resolution", "0.1",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 5, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // run directory holds CSV, gap report, and manifest
    let run_dir = std::fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    assert!(run_dir.join("eigenvalues.csv").exists());
    assert!(run_dir.join("gap_report.json").exists());
    let manifest = std::fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"config_hash\""));
    assert!(manifest.contains("\"command\": \"spectrum\""));
}

#[test]
fn spectrum_rejects_rational_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let cos = write_file(dir.path(), "cos.json", COS_1D);
    let out = qslab()
        .arg("--out-dir")
        .arg(dir.path().join("runs"))
        .args(["spectrum"])
        .arg(&cos)
        .args(["--lambda", "1", "--omega", "0.5", "--l", "100", "--phases", "2"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--skip-dio"));

    // the override records the skip and proceeds
    let out = qslab()
        .arg("--out-dir")
        .arg(dir.path().join("runs"))
        .args(["spectrum"])
        .arg(&cos)
        .args([
            "--lambda", "1", "--omega", "0.5", "--l", "100", "--phases", "2", "--skip-dio",
        ])
        .output()
        .unwrap();
    assert_ne!(exit_code(&out), 2);
}

#[test]
fn survey_reruns_are_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(
        dir.path(),
        "survey.json",
        r#"{"d": 2, "n": 2, "distribution": {"gaussian": {"sigma": 1.0}},
            "sample_count": 12, "master_seed": 77,
            "classify": {"cartan": null}}"#,
    );
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let runs = dir.path().join(format!("runs-{threads}"));
        let out = qslab()
            .arg("--out-dir")
            .arg(&runs)
            .args(["--threads", threads, "survey"])
            .arg(&config)
            .output()
            .unwrap();
        assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        let run_dir = std::fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
        csvs.push(std::fs::read(run_dir.join("survey.csv")).unwrap());
        assert!(run_dir.join("manifest.json").exists());
        assert!(run_dir.join("aggregate.json").exists());
    }
    assert_eq!(csvs[0], csvs[1], "survey CSV differs across --threads");
}

#[test]
fn cartan_on_constant_potential_fails() {
    let dir = tempfile::tempdir().unwrap();
    let constant = write_file(
        dir.path(),
        "const.json",
        r#"{"d": 2, "n": 1, "coefficients": [1.5, 0.0, 0.0, 0.0, 0.0]}"#,
    );
    let out = qslab()
        .arg("--out-dir")
        .arg(dir.path().join("runs"))
        .args(["cartan"])
        .arg(&constant)
        .args([
            "--kind", "4", "--k-list", "2,3", "--samples", "10000",
            "--eta-count", "4", "--h0-count", "4",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cartan_sweep_writes_decay_csv() {
    let dir = tempfile::tempdir().unwrap();
    let coscos = write_file(dir.path(), "coscos.json", COS_COS);
    let runs = dir.path().join("runs");
    let out = qslab()
        .arg("--out-dir")
        .arg(&runs)
        .args(["cartan"])
        .arg(&coscos)
        .args([
            "--kind", "4", "--k-list", "2,3,4", "--samples", "10000",
            "--eta-count", "4", "--h0-count", "4",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let run_dir = std::fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    let csv = std::fs::read_to_string(run_dir.join("decay.csv")).unwrap();
    assert!(csv.starts_with("K,kind,worst_estimate,worst_upper_conf,bound,pass,budget_limited"));
    assert_eq!(csv.lines().count(), 4); // header + 3 K rows
}

#[test]
fn slice_rejects_too_few_steps() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_file(dir.path(), "a.json", COS_1D);
    let b = write_file(dir.path(), "b.json", COS_1D);
    let out = qslab()
        .arg("--out-dir")
        .arg(dir.path().join("runs"))
        .args(["slice"])
        .arg(&a)
        .arg(&b)
        .args(["--steps", "5"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn slice_reports_failing_run_at_start() {
    let dir = tempfile::tempdir().unwrap();
    // cos(4πx) (tied extrema) into cos(2πx) shifted basis: d=1, n=2 files
    let tied = write_file(
        dir.path(),
        "tied.json",
        r#"{"d": 1, "n": 2, "coefficients": [0.0, 0.0, 0.0, 1.0, 0.0]}"#,
    );
    let good = write_file(
        dir.path(),
        "good.json",
        r#"{"d": 1, "n": 2, "coefficients": [0.1, 1.0, 0.3, 0.2, -0.4]}"#,
    );
    let out = qslab()
        .arg("--out-dir")
        .arg(dir.path().join("runs"))
        .args(["slice"])
        .arg(&tied)
        .arg(&good)
        .args(["--steps", "50"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let failing = report["failing_parameters"].as_array().unwrap();
    assert!(failing.iter().any(|t| t.as_f64() == Some(0.0)));
}
