use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use forgetting_dynamics::experiments::curve::{CURVE_HEADER, SUMMARY_HEADER};
use forgetting_dynamics::experiments::heatmap::HEATMAP_HEADER;
use forgetting_dynamics::experiments::overshoot::OVERSHOOT_HEADER;
use forgetting_dynamics::experiments::preset;
use forgetting_dynamics::simulator::TRAJECTORY_HEADER;

fn forgetting(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forgetting"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn small_config(dir: &Path) -> String {
    let mut c = preset("fig3b-text").unwrap();
    c.n = 200;
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn curve_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("curve");
    let run = forgetting(
        &["curve", "--config", &cfg, "--seeds", "2", "--t1", "1", "--t2", "1", "--record-dt", "0.5"],
        &out,
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(first_line(&out.join("curve.csv")), CURVE_HEADER);
    assert_eq!(first_line(&out.join("curve_summary.csv")), SUMMARY_HEADER);
    assert_eq!(first_line(&out.join("trajectories.csv")), TRAJECTORY_HEADER);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("curve.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seeds"], serde_json::json!([0, 1]));
    assert_eq!(meta["config"]["n"], 200);
    // phases 1 and 2 at t = 0, 0.5, 1
    assert_eq!(fs::read_to_string(out.join("curve.csv")).unwrap().lines().count(), 7);
}

#[test]
fn curve_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = forgetting(
        &["curve", "--config", &cfg, "--seeds", "1", "--t1", "0.5", "--t2", "0.5", "--format", "json"],
        dir.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("curve.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["kind"], "curve");
    assert!(report["rows"].as_array().unwrap().len() > 2);
}

#[test]
fn heatmap_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let run = forgetting(&["heatmap"], dir.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(dir.path().join("heatmap.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), HEATMAP_HEADER);
    assert_eq!(csv.lines().count(), 1 + 26 * 26);
    assert!(dir.path().join("heatmap.meta.json").exists());
}

#[test]
fn overshoot_from_sweep_file() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = serde_json::json!({
        "axes": [
            {"param": "eta", "min": 1.0, "max": 2.0, "count": 3},
            {"param": "sigma2_sq", "min": 0.8, "max": 1.7, "count": 2}
        ],
        "base": preset("fig3a").unwrap(),
        "replicates": 1
    });
    let path = dir.path().join("sweep.json");
    fs::write(&path, sweep.to_string()).unwrap();
    let run = forgetting(&["overshoot", "--sweep", path.to_str().unwrap()], dir.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(dir.path().join("overshoot.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), OVERSHOOT_HEADER);
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.contains("DIVERGES"));
    assert!(csv.contains("OCCURS"));
}

#[test]
fn validate_reports_derived_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let run = forgetting(&["validate", "--preset", "fig3b-text"], dir.path());
    assert!(run.status.success());
    let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["overshoot_class"], "OCCURS");
    assert!((v["gamma2"].as_f64().unwrap() - 1.36).abs() < 1e-12);
    assert!(dir.path().join("validate.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = preset("fig3a").unwrap();
    c.sigma2_sq = 3.0;
    let divergent = dir.path().join("divergent.json");
    fs::write(&divergent, serde_json::to_string(&c).unwrap()).unwrap();
    let run = forgetting(&["validate", "--config", divergent.to_str().unwrap()], dir.path());
    assert_eq!(run.status.code(), Some(2));

    let run = forgetting(&["validate", "--preset", "nope"], dir.path());
    assert_eq!(run.status.code(), Some(2));

    let run = forgetting(&["validate", "--format", "xml"], dir.path());
    assert_eq!(run.status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    let run = forgetting(&["validate", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(run.status.code(), Some(1));
}
