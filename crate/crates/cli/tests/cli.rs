use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfa")).args(args).output().expect("binary runs")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name).to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn put(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn error_kind(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is the error envelope");
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn symmetrise_example_matrix_matches_table() {
    let v = stdout_json(&bfa(&["symmetrise", &data("example_m.json")]));
    assert_eq!(v["format"], "syndrome");
    let p: Vec<f64> = serde_json::from_value(v["p_tilde"].clone()).unwrap();
    let expected = [
        (0b0000, 0.8040),
        (0b0001, 0.0605),
        (0b0110, 0.0795),
        (0b0111, 0.0060),
        (0b1000, 0.0423),
        (0b1001, 0.0032),
        (0b1110, 0.0042),
        (0b1111, 0.0003),
    ];
    for s in 0..16 {
        match expected.iter().find(|(k, _)| *k == s) {
            Some((_, want)) => assert!((p[s] - want).abs() < 5e-5, "syndrome {s:04b}: {}", p[s]),
            None => assert!(p[s].abs() < 1e-12),
        }
    }
}

#[test]
fn identity_model_returns_observed_frequencies() {
    let dir = TempDir::new().unwrap();
    let model = put(&dir, "id.json", r#"{"n": 2, "format": "syndrome", "p_tilde": [1, 0, 0, 0]}"#);
    let counts = put(&dir, "c.json", r#"{"n": 2, "shots": 100, "counts": {"00": 50, "01": 20, "11": 30}}"#);
    for method in ["inverse", "lsq"] {
        let v = stdout_json(&bfa(&["mitigate", "--model", model.to_str().unwrap(), "--method", method, counts.to_str().unwrap()]));
        let physical: Vec<f64> = serde_json::from_value(v["physical"].clone()).unwrap();
        for (got, want) in physical.iter().zip([0.5, 0.2, 0.0, 0.3]) {
            assert!((got - want).abs() < 1e-9, "{method}: {physical:?}");
        }
    }
}

#[test]
fn complexity_report_for_five_qubits() {
    let v = stdout_json(&bfa(&["complexity", "--n", "5", "--pe", "0.05", "--eps", "0.01", "--gamma", "0.01"]));
    assert_eq!(v["k"], 2);
    assert_eq!(v["N"]["exact"], 16);
    assert!(v["m_required"].as_u64().unwrap() > 0);
}

#[test]
fn reduced_support_mitigation_of_ghz_counts() {
    let v = stdout_json(&bfa(&[
        "mitigate",
        "--model",
        &data("example_p_tilde.json"),
        "--method",
        "lsq-reduced",
        "--support-file",
        &data("ghz_support.json"),
        &data("example_ghz_counts.json"),
    ]));
    let physical: Vec<f64> = serde_json::from_value(v["physical"].clone()).unwrap();
    let total: f64 = physical.iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(physical.iter().all(|&x| x >= 0.0));
    assert_eq!(v["converged"], true);
}

#[test]
fn calibrate_then_estimate_recovers_model() {
    let dir = TempDir::new().unwrap();
    let cal = dir.path().join("cal.json");
    let out = bfa(&[
        "calibrate",
        "--protocol",
        "bfa",
        "--model",
        &data("example_m.json"),
        "--shots",
        "200000",
        "--seed",
        "5",
        "-o",
        cal.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let est = dir.path().join("est.json");
    assert!(bfa(&["estimate", "--model", "bfa", cal.to_str().unwrap(), "-o", est.to_str().unwrap()]).status.success());
    let v = stdout_json(&bfa(&["fidelity", est.to_str().unwrap(), &data("example_p_tilde.json")]));
    assert!(v["fidelity"].as_f64().unwrap() > 0.999);
}

#[test]
fn grouped_estimate_requires_partition() {
    let out = bfa(&["estimate", "--model", "grouped", &data("example_calibration.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "MissingInput");
    let v = stdout_json(&bfa(&[
        "estimate",
        "--model",
        "grouped",
        "--partition",
        "3/2,1/0",
        &data("example_calibration.json"),
    ]));
    assert_eq!(v["format"], "grouped");
}

#[test]
fn calibration_is_deterministic_under_fixed_seed() {
    let run = || bfa(&["calibrate", "--protocol", "full", "--model", &data("example_m.json"), "--shots", "16000"]).stdout;
    let first = run();
    assert!(!first.is_empty());
    assert_eq!(first, run());
}

#[test]
fn singular_model_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let model = put(&dir, "flat.json", r#"{"n": 1, "format": "syndrome", "p_tilde": [0.5, 0.5]}"#);
    let counts = put(&dir, "c.json", r#"{"n": 1, "shots": 10, "counts": {"0": 4, "1": 6}}"#);
    let out = bfa(&["invert", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "NearSingular");
    let out = bfa(&["mitigate", "--model", model.to_str().unwrap(), counts.to_str().unwrap()]);
    assert_eq!(error_kind(&out), "NearSingular");
    assert!(bfa(&["invert", "--clamp", model.to_str().unwrap()]).status.success());
}

#[test]
fn support_not_closed_is_reported() {
    let dir = TempDir::new().unwrap();
    let support = put(&dir, "s.json", r#"["0000", "0001"]"#);
    let out = bfa(&[
        "mitigate",
        "--model",
        &data("example_p_tilde.json"),
        "--method",
        "lsq-reduced",
        "--support-file",
        support.to_str().unwrap(),
        &data("example_ghz_counts.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "SupportNotClosed");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(bfa(&["nonsense"]).status.code(), Some(1));
    assert_eq!(bfa(&["boost", "x.json"]).status.code(), Some(1));
    assert_eq!(bfa(&["mitigate", "--method", "magic", "--model", "m", "c"]).status.code(), Some(1));
    let help = bfa(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("syndrome-inverse"));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = bfa(&["densify", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "Io");
}

#[test]
fn tvd_between_identical_counts_is_zero() {
    let path = data("example_ghz_counts.json");
    let v = stdout_json(&bfa(&["tvd", &path, &path]));
    assert_eq!(v["tvd"], 0.0);
}

#[test]
fn tensor_of_two_single_qubit_models() {
    let dir = TempDir::new().unwrap();
    let a = put(&dir, "a.json", r#"{"n": 1, "format": "dense", "columns": [[0.9, 0.1], [0.2, 0.8]]}"#);
    let b = put(&dir, "b.json", r#"{"n": 1, "format": "dense", "columns": [[1, 0], [0, 1]]}"#);
    let v = stdout_json(&bfa(&["tensor", a.to_str().unwrap(), b.to_str().unwrap()]));
    assert_eq!(v["n"], 2);
    let cols: Vec<Vec<f64>> = serde_json::from_value(v["columns"].clone()).unwrap();
    // a sits on qubit 1, so input 10 flips to 00 with probability 0.2
    assert!((cols[0b10][0b00] - 0.2).abs() < 1e-15);
    assert!((cols[0b00][0b10] - 0.1).abs() < 1e-15);
}

#[test]
fn bench_writes_identical_outputs_for_any_worker_count() {
    let dir = TempDir::new().unwrap();
    let config = put(
        &dir,
        "cfg.json",
        r#"{"kind": "fixed-budget", "n_values": [4], "model": {"source": "example"}, "trials": 4,
            "measurement_shots": 2000, "budget_per_state": 50, "seed": 11}"#,
    );
    let mut csvs = Vec::new();
    for workers in ["1", "3"] {
        let csv = dir.path().join(format!("w{workers}.csv"));
        let json = dir.path().join(format!("w{workers}.json"));
        let out = bfa(&[
            "bench",
            "fixed-budget",
            "--config",
            config.to_str().unwrap(),
            "--workers",
            workers,
            "--out-csv",
            csv.to_str().unwrap(),
            "--out-json",
            json.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push((fs::read_to_string(csv).unwrap(), fs::read_to_string(json).unwrap()));
    }
    assert!(csvs[0].0.starts_with("n,budget,trial,model,metric,seed"));
    assert_eq!(csvs[0], csvs[1]);
    let wrong_kind = bfa(&["bench", "graph", "--config", config.to_str().unwrap()]);
    assert_eq!(wrong_kind.status.code(), Some(2));
}
