use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ibflow"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    bin()
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn check_condition_on_first_bessel_zero_fails_condition() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("check-condition", &configs().join("check-condition.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("check-condition.json"));
    assert_eq!(report["condition"]["satisfied"], json!(false));
    let csv = fs::read_to_string(dir.path().join("check-condition.csv")).unwrap();
    assert!(csv.starts_with("zero_index,zero,location\n"));
}

#[test]
fn verify_identity_gap_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("verify-identity", &configs().join("verify-identity.json"), dir.path());
    assert!(out.status.success());
    let report = read_json(&dir.path().join("verify-identity.json"));
    assert!(report["max_rel_gap"].as_f64().unwrap() < 1e-4);
    assert_eq!(report["command"], json!("verify-identity"));
    assert!(report["normalized_model"].is_object());
}

#[test]
fn unknown_subcommand_exits_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("frobnicate", &configs().join("covariance.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn missing_config_flag_exits_with_validation_status() {
    let out = bin().arg("covariance").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_values_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&configs().join("lyapunov.json"));
    v["params"]["dt"] = json!(-1.0);
    let p = write_config(dir.path(), "bad.json", &v);
    let out = run("lyapunov", &p, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.dt"));

    let mut v = read_json(&configs().join("covariance.json"));
    v["model"]["mu0"] = json!(0.9);
    let p = write_config(dir.path(), "bad_mu.json", &v);
    let out = run("covariance", &p, dir.path());
    assert_eq!(out.status.code(), Some(2));

    let mut v = read_json(&configs().join("covariance.json"));
    v["params"]["bogus"] = json!(1);
    let p = write_config(dir.path(), "bad_key.json", &v);
    assert_eq!(run("covariance", &p, dir.path()).status.code(), Some(2));
}

#[test]
fn command_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("lyapunov", &configs().join("covariance.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_jobs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["covariance", "--jobs", "0", "--config"])
        .arg(configs().join("covariance.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run("covariance", &configs().join("covariance.json"), dir.path()).status.success());
    let csv = fs::read_to_string(dir.path().join("covariance.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,B_L,B_N,B_PL,B_PN,B_SL,B_SN"));
    let mut rows = 0;
    for line in lines {
        for cell in line.split(',') {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(ibflow::cli::fmt_f64(v), cell);
        }
        rows += 1;
    }
    assert_eq!(rows, 51);
    let report = read_json(&dir.path().join("covariance.json"));
    let lambda = report["flow_constants"]["lambda"].as_f64().unwrap();
    assert!(lambda.is_finite());
}

#[test]
fn report_config_reruns_to_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&configs().join("lyapunov.json"));
    v["params"]["t"] = json!(1.0);
    v["params"]["n_pairs"] = json!(8);
    let p = write_config(dir.path(), "small.json", &v);
    let first = dir.path().join("first");
    assert!(run("lyapunov", &p, &first).status.success());
    let report = read_json(&first.join("lyapunov.json"));
    let again = write_config(dir.path(), "again.json", &report["config"]);
    let second = dir.path().join("second");
    assert!(run("lyapunov", &again, &second).status.success());
    assert_eq!(
        fs::read(first.join("lyapunov.csv")).unwrap(),
        fs::read(second.join("lyapunov.csv")).unwrap()
    );
}

#[test]
fn jobs_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&configs().join("squeeze-tilted.json"));
    v["params"]["n_paths"] = json!(6);
    v["params"]["n_boundary"] = json!(16);
    v["params"]["dt"] = json!(5e-3);
    let p = write_config(dir.path(), "sq.json", &v);
    let mut csvs = Vec::new();
    for jobs in ["1", "2"] {
        let out_dir = dir.path().join(jobs);
        let out = bin()
            .args(["squeeze", "--quiet", "--jobs", jobs, "--config"])
            .arg(&p)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("squeeze.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let header = String::from_utf8_lossy(&csvs[0]);
    assert!(header.starts_with("path,t,diam,contained\n"));
}

#[test]
fn summary_printed_unless_quiet() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("check-condition")
        .arg("--config")
        .arg(configs().join("check-condition.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("check-condition"));
}
