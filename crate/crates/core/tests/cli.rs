use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn virann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virann"))
        .args(args)
        .env_remove("VIRANN_C")
        .env_remove("VIRANN_H")
        .env_remove("VIRANN_N")
        .env_remove("VIRANN_SUITE")
        .env_remove("VIRANN_OUT")
        .env_remove("VIRANN_TIMING")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("virann-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid json")
}

#[test]
fn build_writes_graded_dimensions() {
    let out = virann(&["build", "--c", "2", "--h", "0.5", "--N", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out.stdout);
    let dims: Vec<u64> = doc["dims"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(dims, [1, 1, 2, 3, 5, 7, 11, 15, 22]);
    assert_eq!(doc["N"], 8);
}

#[test]
fn build_quotients_null_vectors() {
    // h = 1/2 at c = 1/2 has a null vector at level 2
    let out = virann(&["build", "--c", "0.5", "--h", "0.5", "--N", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["dims"], serde_json::json!([1, 1, 1]));
}

#[test]
fn verify_json_and_csv_agree() {
    let dir = scratch("formats");
    let d = dir.to_str().unwrap();
    let a = virann(&["verify", "--suite", "energy,standard", "--N", "8", "--out", d]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = virann(&["verify", "--suite", "energy,standard", "--N", "8", "--out", d, "--format", "csv"]);
    assert_eq!(b.status.code(), Some(0));
    let report = json(&fs::read(dir.join("report.json")).unwrap());
    let checks = report["checks"].as_array().unwrap();
    let csv = fs::read_to_string(dir.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("id,anchor,residual,bound,pass,seconds"));
    assert_eq!(lines.count(), checks.len());
    assert!(report["sign_convention"].as_str().unwrap().contains("outer"));
    assert!(checks.iter().all(|c| c["seconds"] == 0.0));
}

#[test]
fn verify_is_deterministic() {
    let args = ["verify", "--suite", "qei,semigroup", "--N", "8", "--seed", "7"];
    let (a, b) = (virann(&args), virann(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_reads_config_files() {
    let dir = scratch("config");
    let cfg = dir.join("config.json");
    fs::write(&cfg, r#"{"module": {"c": 2, "h": 0.5, "N": 8}, "suites": ["standard"], "seed": 3}"#).unwrap();
    let out = virann(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out.stdout);
    assert_eq!(report["seed"], 3);
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);

    fs::write(&cfg, r#"{"module": {"c": 2, "h": 0.5, "N": 8}, "colour": "red"}"#).unwrap();
    assert_eq!(virann(&["verify", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn unknown_suite_is_a_schema_error() {
    let out = virann(&["verify", "--suite", "energy,bogus", "--N", "8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn failing_checks_exit_three() {
    // maxmode 4 brackets do not fit below cutoff 6
    let out = virann(&["verify", "--suite", "bracket", "--N", "6"]);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&out.stdout);
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false));
}

#[test]
fn represent_standard_and_non_inward() {
    let dir = scratch("represent");
    let d = dir.to_str().unwrap();
    assert_eq!(virann(&["build", "--N", "4", "--out", d]).status.code(), Some(0));
    let module = dir.join("module.json");
    let element = dir.join("element.json");
    let ln_half = 0.5f64.ln();
    fs::write(&element, format!(r#"{{"path": {{"knots": [0, 1], "fields": [{{"modes": [[0, {ln_half}, 0]]}}, {{"modes": [[0, {ln_half}, 0]]}}]}}}}"#)).unwrap();
    let out = virann(&["represent", "--module", module.to_str().unwrap(), "--element", element.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out.stdout);
    let u00 = doc["U"][0][0][0].as_f64().unwrap();
    assert!((u00 - 0.5f64.sqrt()).abs() < 1e-10);
    assert!((doc["bounds"]["op_norm"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-10);

    fs::write(&element, r#"{"path": {"knots": [0, 1], "fields": [{"modes": [[0, 0.5, 0]]}, {"modes": [[0, 0.5, 0]]}]}}"#).unwrap();
    let out = virann(&["represent", "--module", module.to_str().unwrap(), "--element", element.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&element, r#"{"path": {"knots": [0, 1]}}"#).unwrap();
    let out = virann(&["represent", "--module", module.to_str().unwrap(), "--element", element.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
