use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kepcoll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kepcoll"))
        .args(args)
        .env("KC_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sigma_equal_masses() {
    let v = json_stdout(&kepcoll(&["sigma", "--mu1", "0.5"]));
    assert!((v["sigma"].as_f64().unwrap() + 0.421875).abs() < 1e-12);
    assert!((v["e_crit"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(v["L1_crit"].is_number() && v["L2_crit"].is_number());
}

#[test]
fn sigma_scales_with_l() {
    let a = json_stdout(&kepcoll(&["sigma", "--mu1", "0.3"]));
    let b = json_stdout(&kepcoll(&["sigma", "--mu1", "0.3", "--L", "2"]));
    assert_eq!(a["sigma"], b["sigma"]);
    let ratio = b["L1_crit"].as_f64().unwrap() / a["L1_crit"].as_f64().unwrap();
    assert!((ratio - 2.0).abs() < 1e-15);
}

#[test]
fn critical_d_equal_mass_inverse() {
    let v = json_stdout(&kepcoll(&["critical-d", "--mu1", "0.5", "--el2", "-0.4951"]));
    let d = v["d"].as_f64().unwrap();
    let closed = v["d_closed_form"].as_f64().unwrap();
    assert!((d - 0.2).abs() < 1e-3);
    assert!((d / closed - 1.0).abs() < 1e-5);
}

#[test]
fn critical_d_unequal_has_no_closed_form() {
    let v = json_stdout(&kepcoll(&["critical-d", "--mu1", "0.45", "--el2", "-0.445"]));
    assert!((v["d"].as_f64().unwrap() / 0.034 - 1.0).abs() < 0.1);
    assert!(v.get("d_closed_form").is_none());
}

#[test]
fn simulate_bound_regime_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let prefix = dir.path().join(name);
        let args = [
            "simulate", "--mu1", "0.45", "--el2", "-0.445", "--eps", "0", "--steps", "100000", "--seed", "7", "--out",
            path_str(&prefix),
        ];
        let v = json_stdout(&kepcoll(&args));
        assert_eq!(v["all_elliptic"], Value::Bool(true));
        let csv = std::fs::read(dir.path().join(format!("{name}.csv"))).unwrap();
        let rep = std::fs::read(dir.path().join(format!("{name}.report.json"))).unwrap();
        (csv, rep)
    };
    let (csv_a, rep_a) = run("a");
    let (csv_b, rep_b) = run("b");
    assert_eq!(csv_a, csv_b);
    assert_eq!(rep_a, rep_b);
    let rep: Value = serde_json::from_slice(&rep_a).unwrap();
    assert_eq!(rep["report"]["all_elliptic"], Value::Bool(true));
    assert_eq!(rep["config"]["seed"], 7);
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("# mu1="));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 100_001);
}

#[test]
fn simulate_disks_mode() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("disk");
    let v = json_stdout(&kepcoll(&[
        "simulate", "--mu1", "0.45", "--el2", "-0.45", "--eps", "0.1", "--steps", "200", "--seed", "3", "--mode",
        "disks", "--d", "0.05", "--dl", "0.02", "--out", path_str(&prefix),
    ]));
    assert!(v["n_events"].as_u64().unwrap() > 0);
    let rep: Value = serde_json::from_slice(&std::fs::read(dir.path().join("disk.report.json")).unwrap()).unwrap();
    assert!(rep["config"]["mode"]["Disks"]["d"].is_number());
}

#[test]
fn scan_writes_both_formats_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_stdout(&kepcoll(&[
        "scan", "--mu1", "0.45", "--el2", "-0.6", "--kind", "region", "--nx", "40", "--ny", "30", "--out",
        path_str(dir.path()),
    ]));
    assert_eq!(v["written"].as_array().unwrap().len(), 2);
    let csv = dir.path().join("region_mu0.45_EL2-0.6.csv");
    let g = kepcoll::scan::read_grid_csv(&csv).unwrap();
    assert_eq!((g.dl.n, g.de.n), (40, 30));
    let pgm = std::fs::read(dir.path().join("region_mu0.45_EL2-0.6.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
    assert!(pgm.len() > 40 * 30);
}

#[test]
fn scan_single_file_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    json_stdout(&kepcoll(&[
        "scan", "--mu1", "0.3", "--el2", "-0.5", "--kind", "dbar", "--nx", "20", "--ny", "20", "--out", path_str(&out),
    ]));
    let g = kepcoll::scan::read_grid_csv(&out).unwrap();
    assert_eq!(g.meta.kind, kepcoll::scan::ScanKind::Dbar);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn escape_search_certificate_replays() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("esc");
    let v = json_stdout(&kepcoll(&[
        "escape-search", "--mu1", "0.45", "--el2", "-0.41", "--trials", "200", "--steps", "1000", "--seed", "2024",
        "--domega", "1.0471975511965976", "--out", path_str(&prefix),
    ]));
    if v["found"] == Value::Bool(true) {
        assert_eq!(v["replays_exactly"], Value::Bool(true));
        assert!(dir.path().join("esc.csv").exists());
    }
}

#[test]
fn escape_search_bound_regime_finds_nothing() {
    let v = json_stdout(&kepcoll(&[
        "escape-search", "--mu1", "0.5", "--el2", "-0.5", "--trials", "8", "--steps", "500", "--seed", "1",
    ]));
    assert_eq!(v["found"], Value::Bool(false));
}

#[test]
fn verify_passes() {
    let v = json_stdout(&kepcoll(&["verify"]));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == Value::Bool(true)));
}

#[test]
fn flag_errors_exit_2() {
    for args in [
        vec!["sigma"],
        vec!["sigma", "--mu1", "0.7"],
        vec!["sigma", "--mu1", "abc"],
        vec!["simulate", "--mu1", "0.45", "--el2", "-0.4", "--eps", "0.9"],
        vec!["simulate", "--mu1", "0.45", "--el2", "-0.4", "--eps", "often"],
        vec!["simulate", "--mu1", "0.45", "--el2", "-0.4", "--mode", "disks"],
        vec!["simulate", "--mu1", "0.45", "--el2", "0.1"],
        vec!["simulate", "--mu1", "0.45", "--el2", "-0.52", "--dl", "0.1"],
        vec!["critical-d", "--mu1", "0.5", "--el2", "0.2"],
        vec!["scan", "--mu1", "0.45", "--el2", "-0.4", "--nx", "0"],
        vec!["frobnicate"],
    ] {
        let out = kepcoll(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn bad_thread_count_is_a_flag_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_kepcoll"))
        .args(["sigma", "--mu1", "0.5"])
        .env("KC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
