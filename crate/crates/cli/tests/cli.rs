//! End-to-end runs of the `eitlab` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn eitlab(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eitlab"));
    cmd.args(args).env_remove("EITLAB_WORKERS");
    if let Some(w) = workers {
        cmd.env("EITLAB_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_mode(mode: &str, config: &Path, out: &Path, extra: &[&str], workers: Option<&str>) -> Output {
    let mut args = vec![mode, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    eitlab(&args, workers)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SPECTRUM: &str = r#"{
  "schema_version": 1,
  "params": { "kappa_mhz": 2.196, "g_n_mhz": 13.6, "omega_c_mhz": 4.1 },
  "spectrum": { "model": "quadrature", "delta_min_mhz": -0.5, "delta_max_mhz": 0.5, "step_mhz": 0.01, "dip": true }
}"#;

#[test]
fn spectrum_run_writes_csv_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.json", SPECTRUM);
    let out = tmp.path().join("out");
    let o = run_mode("spectrum", &cfg, &out, &["--svg"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["spectrum.csv", "dip.txt", "spectrum.svg", "summary.txt", "manifest.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let csv = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("delta_hz"), "{header}");
    assert_eq!(lines.count(), 101);
    let first_value = csv.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(first_value, "-5.00000000000e5");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "spectrum");
    assert_eq!(manifest["config"]["schema_version"], 1);
    assert!((manifest["resolved_params"]["g_n_mhz"].as_f64().unwrap() - 13.6).abs() < 1e-12);
}

#[test]
fn normal_mode_minima_sit_near_the_collective_coupling() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n.json",
        r#"{
  "schema_version": 1,
  "params": { "kappa_mhz": 2.196, "g_n_mhz": 13.9, "omega_c_mhz": 0.0, "gamma_mhz": 0.05 },
  "spectrum": { "model": "continuous", "delta_min_mhz": -30.0, "delta_max_mhz": 30.0, "step_mhz": 0.01 }
}"#,
    );
    let out = tmp.path().join("out");
    let o = run_mode("spectrum", &cfg, &out, &[], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    let upper = rows.iter().filter(|r| r.0 > 0.0).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!((upper.0 / 1e6 - 13.9).abs() < 0.05, "minimum at {} Hz", upper.0);
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.json",
        r#"{
  "schema_version": 1,
  "seed": 3,
  "params": { "kappa_mhz": 2.196, "g_n_mhz": 13.6, "omega_c_mhz": 4.1 },
  "spectrum": {
    "model": "discrete", "delta_min_mhz": -0.2, "delta_max_mhz": 0.2, "step_mhz": 0.01,
    "discrete": { "ions": 5000, "radius_um": 185.0, "sampling": "iid" }
  }
}"#,
    );
    let runs: Vec<String> = [None, Some("1"), Some("3")]
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let out = tmp.path().join(format!("out{i}"));
            let o = run_mode("spectrum", &cfg, &out, &[], *w);
            assert!(o.status.success(), "{}", stderr(&o));
            fs::read_to_string(out.join("spectrum.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);

    let other = tmp.path().join("other");
    let o = run_mode("spectrum", &cfg, &other, &["--seed", "4"], None);
    assert!(o.status.success());
    assert_ne!(fs::read_to_string(other.join("spectrum.csv")).unwrap(), runs[0]);
}

#[test]
fn discrete_model_without_seed_is_a_schema_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.json",
        r#"{
  "schema_version": 1,
  "params": { "kappa_mhz": 2.196, "g_n_mhz": 13.6, "omega_c_mhz": 4.1 },
  "spectrum": {
    "model": "discrete", "delta_min_mhz": -0.2, "delta_max_mhz": 0.2, "step_mhz": 0.01,
    "discrete": { "ions": 100, "radius_um": 185.0 }
  }
}"#,
    );
    let o = run_mode("spectrum", &cfg, &tmp.path().join("out"), &[], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn schema_violations_exit_with_two_and_write_nothing() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("unknown field", SPECTRUM.replace("\"dip\": true", "\"dip\": true, \"colour\": 1")),
        ("bad version", SPECTRUM.replace("\"schema_version\": 1", "\"schema_version\": 9")),
        ("empty grid", SPECTRUM.replace("\"delta_max_mhz\": 0.5", "\"delta_max_mhz\": -0.6")),
        ("negative rate", SPECTRUM.replace("\"kappa_mhz\": 2.196", "\"kappa_mhz\": -1.0")),
        ("not json", "{ schema_version".to_string()),
    ];
    for (i, (what, body)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), body);
        let out = tmp.path().join(format!("out{i}"));
        let o = run_mode("spectrum", &cfg, &out, &[], None);
        assert_eq!(o.status.code(), Some(2), "{what}: {}", stderr(&o));
        assert!(!out.exists(), "{what}: output directory was created");
    }
}

#[test]
fn mode_mismatch_and_bad_workers_are_schema_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.json", SPECTRUM);
    let o = run_mode("dynamics", &cfg, &tmp.path().join("a"), &[], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run_mode("spectrum", &cfg, &tmp.path().join("b"), &[], Some("zero"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = eitlab(&["spectrum", "--config", tmp.path().join("missing.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dip_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n.json",
        r#"{
  "schema_version": 1,
  "params": { "kappa_mhz": 2.196, "g_mhz": 0.556, "n_eff": 100 },
  "scan_n": { "n_eff": [100], "omega_c_mhz": 3.5 }
}"#,
    );
    let out = tmp.path().join("out");
    let o = run_mode("scan-n", &cfg, &out, &[], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.exists());
}

fn reproduce(figure: &str) -> (Output, TempDir) {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "r.json", &format!(r#"{{ "schema_version": 1, "reproduce": {{ "figure": "{figure}" }} }}"#));
    let o = run_mode("reproduce", &cfg, &tmp.path().join("out"), &[], None);
    (o, tmp)
}

#[test]
fn reproduce_transparency_spectra() {
    let (o, tmp) = reproduce("fig3");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("[PASS] atomic transparency with control"), "{text}");
    assert!(text.contains("[PASS] dip HWHM"), "{text}");
    let summary = fs::read_to_string(tmp.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("[PASS] atomic transparency without control"));
}

#[test]
fn reproduce_width_scan_reports_each_check() {
    let (o, tmp) = reproduce("fig9");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("[PASS] HWHM slope"), "{text}");
    assert!(text.contains("[PASS] HWHM offset"), "{text}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    let checks = manifest["checks"].as_array().unwrap();
    assert_eq!(checks.len(), text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count());
}

#[test]
fn unknown_figure_exits_with_two() {
    let (o, _tmp) = reproduce("fig99");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig3"));
}

#[test]
fn fit_recovers_a_lorentzian_from_a_written_spectrum() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.json", SPECTRUM);
    let o = run_mode("spectrum", &cfg, &tmp.path().join("spec"), &[], None);
    assert!(o.status.success());
    let fit = write_config(
        tmp.path(),
        "f.json",
        r#"{
  "schema_version": 1,
  "seed": 5,
  "params": { "kappa_mhz": 2.196, "g_n_mhz": 13.6, "omega_c_mhz": 4.1 },
  "fit": { "kind": "lorentzian", "data": ["spec/spectrum.csv"], "noise_rel": 0.001 }
}"#,
    );
    let out = tmp.path().join("fit");
    let o = run_mode("fit", &fit, &out, &[], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("fit.csv")).unwrap();
    assert!(report.lines().count() >= 2, "{report}");
}
