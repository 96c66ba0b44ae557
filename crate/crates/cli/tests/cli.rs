use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergoclose"))
}

fn instances() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes map, potential and config files into `dir`.
fn instance(dir: &Path, map: &str, potential: &str, extra: &str) -> PathBuf {
    std::fs::write(dir.join("map.json"), map).unwrap();
    std::fs::write(dir.join("potential.json"), potential).unwrap();
    let cfg = dir.join("config.json");
    let sep = if extra.is_empty() { "" } else { ", " };
    std::fs::write(&cfg, format!(r#"{{"map": "map.json", "potential": "potential.json", "bins": 1024{sep}{extra}}}"#)).unwrap();
    cfg
}

const DOUBLING: &str = r#"{"breakpoints": [0.0, 1.0], "liftValues": [0.0, 2.0], "degree": 2}"#;
const COSINE: &str = r#"{"kind": "cosine", "resolution": 4096, "amplitude": 1.0}"#;

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["maximize", "--config", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn missing_map_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance(dir.path(), DOUBLING, COSINE, "");
    std::fs::remove_file(dir.path().join("map.json")).unwrap();
    assert_eq!(code(&run(&["maximize", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn bad_epsilon_is_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance(dir.path(), DOUBLING, COSINE, "");
    let out_dir = dir.path().join("out");
    let out = run(&["perturb", "--config", cfg.to_str().unwrap(), "--eps", "0.6", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
    assert_eq!(code(&run(&["perturb", "--config", cfg.to_str().unwrap(), "--grid", "1000"])), 2);
}

#[test]
fn maximize_doubling_cosine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance(dir.path(), DOUBLING, COSINE, "");
    let out_dir = dir.path().join("out");
    let out = run(&["maximize", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let b = read_json(&out_dir.join("bounds.json"));
    assert!((b["upper"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    assert_eq!(b["periodicBest"].as_f64(), Some(1.0));
    assert_eq!(b["periodicOrbit"], serde_json::json!([0.0]));
}

#[test]
fn maximize_zero_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance(dir.path(), DOUBLING, r#"{"kind": "constant", "value": 0.0, "resolution": 64}"#, "");
    let out_dir = dir.path().join("out");
    assert_eq!(code(&run(&["maximize", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 0);
    let b = read_json(&out_dir.join("bounds.json"));
    assert_eq!(b["upper"].as_f64(), Some(0.0));
    assert_eq!(b["periodicBest"].as_f64(), Some(0.0));
}

#[test]
fn approximate_keeps_doubling_and_tilts_plateaus() {
    let dir = tempfile::tempdir().unwrap();
    let n = 64;
    let doubling: Vec<f64> = (0..=n).map(|i| 2.0 * i as f64 / n as f64).collect();
    let map = serde_json::json!({"samples": {"liftSamples": doubling, "modulus": 2.0}, "epsilon": 0.1});
    let cfg = instance(dir.path(), &map.to_string(), COSINE, "");
    let out_dir = dir.path().join("out");
    assert_eq!(code(&run(&["approximate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 0);
    assert_eq!(read_json(&out_dir.join("map.json")), serde_json::from_str::<Value>(DOUBLING).unwrap());

    // lift flat on [0.25, 0.5], slope 8/3 elsewhere
    let lift = |t: f64| {
        if t < 0.25 {
            t * 8.0 / 3.0
        } else if t < 0.5 {
            2.0 / 3.0
        } else {
            2.0 / 3.0 + (t - 0.5) * 8.0 / 3.0
        }
    };
    let plateau: Vec<f64> = (0..=n).map(|i| lift(i as f64 / n as f64)).collect();
    let map = serde_json::json!({"samples": {"liftSamples": plateau, "modulus": 8.0 / 3.0}, "epsilon": 0.1});
    let cfg = instance(dir.path(), &map.to_string(), COSINE, "");
    let out = run(&["approximate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("sample deviation"));
    let m = read_json(&out_dir.join("map.json"));
    let t: Vec<f64> = m["breakpoints"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let v: Vec<f64> = m["liftValues"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for i in 0..t.len() - 1 {
        assert!(((v[i + 1] - v[i]) / (t[i + 1] - t[i])).abs() >= 1e-3, "flat piece {i}");
    }
}

#[test]
fn perturb_keeps_maximizing_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance(dir.path(), DOUBLING, r#"{"kind": "cosine", "resolution": 4096, "amplitude": 1.0, "offset": -1.0}"#, "");
    let out_dir = dir.path().join("out");
    let out = run(&["perturb", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let plan = read_json(&out_dir.join("plan.json"));
    assert_eq!(plan["case"], "CaseI");
    assert_eq!(plan["steps"], serde_json::json!([]));
    assert_eq!(read_json(&out_dir.join("f_hat.json")), serde_json::from_str::<Value>(DOUBLING).unwrap());
}

#[test]
fn certify_exit_status_follows_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance(dir.path(), DOUBLING, COSINE, "");
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();
    assert_eq!(code(&run(&["perturb", "--config", cfg.to_str().unwrap(), "--out", o])), 0);
    assert_eq!(code(&run(&["certify", "--config", cfg.to_str().unwrap(), "--out", o])), 0);
    let cert = read_json(&out_dir.join("certificate.json"));
    assert_eq!(cert["verdict"], true);
    assert_eq!(cert["seed"], 7);

    // claim the orbit of 1/3, which is neither maximizing nor fixed
    let mut plan = read_json(&out_dir.join("plan.json"));
    plan["periodicPoint"] = serde_json::json!(1.0 / 3.0);
    std::fs::write(out_dir.join("plan.json"), plan.to_string()).unwrap();
    assert_eq!(code(&run(&["certify", "--config", cfg.to_str().unwrap(), "--out", o])), 1);
    let cert = read_json(&out_dir.join("certificate.json"));
    assert_eq!(cert["verdict"], false);
    assert_eq!(cert["lemmaChecks"]["periodicity"]["violations"], 1);
}

#[test]
fn iib_reference_matches_golden_plan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instances().join("case-iib/config.json");
    let o = dir.path().to_str().unwrap();
    let out = run(&["perturb", "--config", cfg.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let plan = read_json(&dir.path().join("plan.json"));
    let golden = read_json(&instances().join("case-iib/golden-plan.json"));
    assert_eq!(plan["case"], "CaseIIb");
    assert_eq!(plan["period"], golden["period"]);
    assert_eq!(plan["period"], plan["geometry"]["nQ"]);
    let close = |a: &Value, b: &Value| (a.as_f64().unwrap() - b.as_f64().unwrap()).abs() <= 1e-12;
    assert!(close(&plan["periodicPoint"], &golden["periodicPoint"]));
    let s = plan["schedule"]["s"].as_array().unwrap();
    let g = golden["schedule"]["s"].as_array().unwrap();
    assert!(s.len() >= 2);
    assert_eq!(s.len(), g.len());
    assert!(s.iter().zip(g).all(|(a, b)| close(a, b)));
}

#[test]
fn sweep_writes_three_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instances().join("case-iia/config.json");
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    for eps in [0.2, 0.1, 0.05] {
        let c = read_json(&dir.path().join(format!("eps-{eps}/certificate.json")));
        assert!(c["distance"].as_f64().unwrap() < eps);
        assert_eq!(c["verdict"], true);
        assert!(dir.path().join(format!("eps-{eps}/orbit.csv")).exists());
    }
}
