use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_wigner-flow");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).env("WIGNER_FLOW_THREADS", "1").output().unwrap()
}

fn harmonic_config(dir: &Path, n: usize) -> String {
    let path = dir.join("harmonic.toml");
    fs::write(&path, format!("[system]\npotential = \"harmonic\"\n\n[state]\nn = {n}\n")).unwrap();
    path.to_string_lossy().into_owned()
}

/// Metadata line, header and numeric rows of a CSV artifact.
fn read_csv(path: &Path) -> (String, Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (meta, header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectrum_lists_closed_form_and_fd_energies() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["spectrum"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (meta, header, rows) = read_csv(&dir.path().join("spectrum.csv"));
    assert!(meta.starts_with("# wigner-flow 0.1.0 config_sha256="));
    assert_eq!(header, ["n", "energy", "energy_fd", "abs_diff"]);
    assert_eq!(rows.len(), 6);
    // (n + ½) - (n + ½)² / 12
    assert!((rows[1][1] - 1.3125).abs() < 1e-5);
    assert!(rows.iter().all(|r| r[3] < 1e-5 && r[1] < 3.0));

    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["files"], serde_json::json!(["spectrum.csv"]));
    assert_eq!(meta.rsplit('=').next().unwrap(), manifest["meta"]["config_sha256"].as_str().unwrap());
}

#[test]
fn current_grid_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--state", "1", "--window=-2:4:13,-2:2:9", "current-grid"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, header, rows) = read_csv(&dir.path().join("current_grid.csv"));
    assert_eq!(header, ["x", "p", "W", "J_x", "J_p", "j_x", "j_p", "dJpdp", "divJ", "terms_used", "converged"]);
    assert_eq!(rows.len(), 13 * 9);
    assert!(rows.iter().all(|r| r.len() == header.len() && r.iter().all(|v| v.is_finite())));
    // x-major order, window corners exact
    assert_eq!((rows[0][0], rows[0][1]), (-2.0, -2.0));
    assert_eq!((rows[1][0], rows[1][1]), (-2.0, -1.5));
    assert_eq!((rows[rows.len() - 1][0], rows[rows.len() - 1][1]), (4.0, 2.0));
    for r in &rows {
        // J_x = p W with M = 1
        assert!((r[3] - r[1] * r[2]).abs() <= 1e-15 * (1.0 + r[3].abs()));
        assert_eq!(r[10], 1.0);
    }
}

#[test]
fn changing_the_state_changes_the_config_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&["spectrum"], a.path()).status.success());
    assert!(run(&["--state", "2", "spectrum"], b.path()).status.success());
    let ha = json(&a.path().join("manifest.json"))["meta"]["config_sha256"].clone();
    let hb = json(&b.path().join("manifest.json"))["meta"]["config_sha256"].clone();
    assert_ne!(ha, hb);
}

#[test]
fn stagnation_json_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harmonic_config(dir.path(), 0);
    let out = run(&["--config", &cfg, "stagnation"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let points = json(&dir.path().join("stagnation.json"));
    let points = points.as_array().unwrap();
    assert_eq!(points.len(), 1);
    let s = &points[0];
    for key in ["x", "p", "index", "winding_residual", "converged", "accepted", "raw_winding", "ill_conditioned", "multi_degenerate", "radius"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["index"], 1);
    assert_eq!(s["accepted"], true);
    assert!(s["x"].as_f64().unwrap().abs() < 1e-8 && s["p"].as_f64().unwrap().abs() < 1e-8);
    let charge = json(&dir.path().join("charge.json"));
    assert_eq!(charge["meta"]["tool"], "wigner-flow");
}

#[test]
fn fieldlines_and_contours_of_a_harmonic_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harmonic_config(dir.path(), 1);
    let out = run(&["--config", &cfg, "--window=-2:2:41,-2:2:41", "--seed-policy", "axis", "fieldlines"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("fieldlines.json"));
    let lines = summary["lines"].as_array().unwrap();
    assert!(!lines.is_empty());
    for l in lines {
        assert_eq!(l["termination"], "closed");
        assert!(l["crossings"].as_array().unwrap().is_empty());
        assert!(l["deviation"].as_f64().unwrap() < 1e-4);
    }
    let (_, header, rows) = read_csv(&dir.path().join("fieldlines.csv"));
    assert_eq!(header, ["fieldline_id", "vertex_index", "x", "p", "W", "arc_length"]);
    let first: Vec<_> = rows.iter().filter(|r| r[0] == 0.0).collect();
    assert_eq!(first.len() as u64, lines[0]["vertices"].as_u64().unwrap());

    assert!(run(&["--config", &cfg, "--window=-2:2:41,-2:2:41", "contours"], dir.path()).status.success());
    let text = fs::read_to_string(dir.path().join("contours.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next().unwrap(), "channel,polyline_id,vertex_index,x,p,closed");
    let w: Vec<(f64, f64)> = lines
        .filter(|l| l.starts_with("W,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect();
    assert!(!w.is_empty());
    assert!(w.iter().all(|(x, p)| (x.hypot(*p) - 0.5f64.sqrt()).abs() < 1e-2));

    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["files"], serde_json::json!(["contours.csv", "fieldlines.csv", "fieldlines.json"]));
}

#[test]
fn harmonic_validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harmonic_config(dir.path(), 0);
    let out = run(&["--config", &cfg, "validate"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
    let report = json(&dir.path().join("validation.json"));
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() > 10);
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[system]\nbogus = 1\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let out = run(&["--window=1:0:10,-1:1:10", "wigner-grid"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["--state", "6", "spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_checks_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--lmax", "1", "--window=-1:2:11,-1:1:11", "current-grid"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    let failing = err["error"]["failing"].as_array().unwrap();
    assert!(failing.iter().any(|c| c["name"] == "grid: samples without series convergence"));
    // artifacts are still written
    assert!(dir.path().join("current_grid.csv").exists());
}
