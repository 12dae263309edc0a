use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gcss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcss")).args(args).output().expect("binary runs")
}

fn summary(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().last().expect("summary line");
    serde_json::from_str(line).expect("summary is JSON")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SHORT_TRACE: &str = "[trace]\ntau_half = 40.0\nbackground_from = 35.0\n";

#[test]
fn missing_config_exits_2() {
    let out = gcss(&["trace", "--config", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(summary(&out)["status"], "error");
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[state]\nalpah = 3.0\n");
    let out = gcss(&["trace", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[selection]\ntarget_fraction = 2.0\n");
    assert_eq!(gcss(&["qspec", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn dry_run_resolves_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let out = gcss(&["qspec", "--dry-run", "--seed", "17", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["dry_run"], true);
    assert_eq!(s["config"]["seed"], 17);
    assert_eq!(s["config"]["state"]["alpha"], 12.0);
    assert_eq!(s["config"]["state"]["wavelength_nm"], 800.0);
    assert_eq!(s["config"]["state"]["fwhm_fs"], 25.0);
    assert!(!out_dir.exists());
}

#[test]
fn qspec_is_deterministic_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[qspec]\nn_shots = 100000\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = gcss(&["qspec", "--config", &cfg, "--seed", "3", "--out", d.to_str().unwrap(), "--threads", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let sa = std::fs::read(a.join("shots.csv")).unwrap();
    assert_eq!(sa, std::fs::read(b.join("shots.csv")).unwrap());
    assert!(sa.starts_with(b"s_ir,s_hh\n"));
    let report = read_json(&a.join("report.json"));
    assert!(report["retained_fraction"].as_f64().unwrap() > 0.0);
    assert!(report["peak_spacings"].is_array());
    assert!(report.get("enrichment").is_none());
    let hist = std::fs::read_to_string(a.join("pn_hist.csv")).unwrap();
    let total: f64 = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn qspec_with_truth_adds_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[qspec]\nn_shots = 100000\n");
    let out = gcss(&["qspec", "--config", &cfg, "--with-truth", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let shots = std::fs::read_to_string(dir.path().join("shots.csv")).unwrap();
    assert!(shots.starts_with("s_ir,s_hh,is_hhg_event,order\n"));
    assert!(read_json(&dir.path().join("report.json"))["enrichment"].as_f64().unwrap() > 1.0);
}

#[test]
fn degenerate_batch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[qspec]\nn_shots = 20\n");
    let out = gcss(&["qspec", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn trace_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_TRACE);
    let out = gcss(&["trace", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_json(&dir.path().join("metrics.json"));
    let coh = &m["states"]["coherent"];
    assert!((coh["s_zero"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(coh["m_depth"].as_f64().unwrap().abs() < 1e-6);
    let mg = m["states"]["gcss"]["m_depth"].as_f64().unwrap();
    let mm = m["states"]["mixture"]["m_depth"].as_f64().unwrap();
    assert!(mg > mm, "{mg} vs {mm}");
    for f in ["trace_raw.csv", "trace_iac.csv", "wigner_gcss.csv"] {
        assert!(dir.path().join(f).exists());
    }
    let raw = std::fs::read_to_string(dir.path().join("trace_raw.csv")).unwrap();
    assert!(raw.starts_with("state,tau_fs,value,sigma\n"));
}

#[test]
fn sweep_flags_small_depletion_and_coherent_limit() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SHORT_TRACE}[sweep]\nalphas = [30.0]\ndelta_alphas = [0.0, 0.29]\n");
    let cfg = write_config(dir.path(), &body);
    let out = gcss(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().filter(|r| r[1] == "0").all(|r| r[6] == "coherent_limit" && r[5] == "false"));
    let gcss_029 = rows.iter().find(|r| r[1] == "0.29" && r[2] == "gcss").unwrap();
    assert_eq!(gcss_029[5], "true");
}

#[test]
fn shg_zero_time_gives_vacuum_harmonic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[shg]\nalpha = 2.0\nn_max_w = 30\nn_max_2w = 6\nt_final = 0.0\nwigner_points = 41\n");
    let out = gcss(&["shg", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = read_json(&dir.path().join("trajectory.json"));
    for input in traj["inputs"].as_array().unwrap() {
        let max = input["wigner_2w"]["max"].as_f64().unwrap();
        assert!((max - std::f64::consts::FRAC_1_PI).abs() < 1e-12);
        assert!(input["min_w_2w"].as_f64().unwrap() >= 0.0);
    }
    assert!(dir.path().join("rho_2w.csv").exists());
    assert!(dir.path().join("wigner_2w.csv").exists());
}

#[test]
fn shg_negativity_only_for_gcss() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcss(&["shg", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert!(s["min_w_2w"]["coherent"].as_f64().unwrap() >= -1e-3);
    assert!(s["min_w_2w"]["gcss"].as_f64().unwrap() < 0.0);
}

#[test]
fn truncation_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[shg]\nalpha = 3.0\nn_max_w = 12\nn_max_2w = 3\nt_final = 2.0\n");
    let out = gcss(&["shg", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
