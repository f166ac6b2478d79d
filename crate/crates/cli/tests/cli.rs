use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tenseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tenseg"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("TENSEG_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.in.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn leftover_staging(out: &Path) -> bool {
    std::fs::read_dir(out)
        .map(|d| d.flatten().any(|e| e.file_name().to_string_lossy().starts_with(".staging-")))
        .unwrap_or(false)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Rods and strings three orders stiffer and effectively unbreakable.
const STRONG: &str = r#"{"schema_version":1,
 "collision":{"speed":1.0,"tensegrity":{"rod_length":0.5,
   "rod_material":{"density":2000.0,"youngs_modulus":3.2e13,"yield_strength":1e13},
   "string_material":{"density":1150.0,"youngs_modulus":4.1e12,"yield_strength":1e13},
   "mass":{"structure_mass":0.05,"quad_mass":0.25,"rod_string_ratio":20.0},
   "pretension":20.0,"quad_offset":0.25}}}"#;

#[test]
fn malformed_field_exits_2_and_names_it() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"schema_version":1,"collision":{"speed":"fast"}}"#);
    let out = tenseg(tmp.path(), &["design-check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("collision.speed"), "{err}");
    assert!(!tmp.path().join("out").join("manifest.json").exists());
}

#[test]
fn unknown_field_and_version_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"schema_version":1,"vehicle":{"thrust_maximum":3.0}}"#);
    let out = tenseg(tmp.path(), &["thrust-map", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vehicle"));

    let cfg = write_config(tmp.path(), r#"{"schema_version":7}"#);
    assert_eq!(tenseg(tmp.path(), &["thrust-map", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn bad_worker_count_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tenseg"))
        .args(["thrust-map", "--out"])
        .arg(tmp.path())
        .env("TENSEG_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strong_design_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), STRONG);
    let out = tenseg(tmp.path(), &["design-check", "--config", &cfg]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("overall: PASS"));
    let report = read_json(&tmp.path().join("out/design_report.json"));
    assert_eq!(report.as_array().unwrap().len(), 3);
}

#[test]
fn default_design_reports_failures_with_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = tenseg(tmp.path(), &["design-check"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"));
    // Outputs of a failing check are still written.
    assert!(tmp.path().join("out/design_report.json").exists());
}

#[test]
fn collide_is_byte_identical_for_same_config_and_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version":1,"seed":9,"collision":{"duration":0.01,
            "orientations":[{"name":"diag","direction":[1,2,3]}]}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        std::fs::create_dir_all(dir).unwrap();
        assert_eq!(tenseg(dir, &["collide", "--config", &cfg]).status.code(), Some(0));
    }
    for name in ["collide_diag.csv", "collide_summary.json", "config.json"] {
        let x = std::fs::read(a.join("out").join(name)).unwrap();
        let y = std::fs::read(b.join("out").join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn manifest_hashes_every_output() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(tenseg(tmp.path(), &["thrust-map", "--seed", "4"]).status.code(), Some(0));
    let out = tmp.path().join("out");
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["command"], "thrust-map");
    assert_eq!(m["seed"], 4);
    let config = std::fs::read(out.join("config.json")).unwrap();
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let outputs = m["outputs"].as_object().unwrap();
    assert!(outputs.contains_key("config.json") && outputs.contains_key("thrust_map.csv"));
    assert_eq!(outputs["config.json"], m["config_sha256"]);
    // The written config re-runs as a config file.
    let cfg: Value = serde_json::from_slice(&config).unwrap();
    assert_eq!(cfg["seed"], 4);
    assert!(!leftover_staging(&out));
}

#[test]
fn thrust_map_has_three_error_columns() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(tenseg(tmp.path(), &["thrust-map"]).status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("out/thrust_map.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.iter().filter(|h| h.starts_with("error_rate")).count(), 3);
    assert_eq!(csv.lines().count(), 1 + 41 * 41);
}

#[test]
fn reorient_plan_covers_every_face() {
    let tmp = TempDir::new().unwrap();
    let code = tenseg(tmp.path(), &["reorient-plan"]).status.code();
    let plan = read_json(&tmp.path().join("out/reorient_plan.json"));
    let paths = plan["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 20);
    let unreachable = plan["unreachable"].as_array().unwrap();
    assert_eq!(code, Some(if unreachable.is_empty() { 0 } else { 1 }));
    let csv = std::fs::read_to_string(tmp.path().join("out/reorient_capacities.csv")).unwrap();
    // Three neighbours per face.
    assert_eq!(csv.lines().count(), 1 + 60);
}

#[test]
fn runtime_error_leaves_no_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    // Faces 0 and 19 are not neighbours; the failure happens after staging began.
    let cfg = write_config(tmp.path(), r#"{"schema_version":1,"pivot":{"rotations":[[0,19]]}}"#);
    let out = tenseg(tmp.path(), &["pivot-sim", "--config", &cfg]);
    assert_ne!(out.status.code(), Some(0));
    let dir = tmp.path().join("out");
    assert!(!leftover_staging(&dir));
    assert!(!dir.join("config.json").exists());
    assert!(!dir.join("manifest.json").exists());
}

#[test]
fn montecarlo_writes_samples_and_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"schema_version":1,"study":{"duration":0.004}}"#);
    let out = tenseg(tmp.path(), &["montecarlo", "--config", &cfg, "--samples", "2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("out/montecarlo_samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let summary = read_json(&tmp.path().join("out/montecarlo_summary.json"));
    assert_eq!(summary["samples"], 2);
    assert_eq!(summary["seed"], 3);
}
