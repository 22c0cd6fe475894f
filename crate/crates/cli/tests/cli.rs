use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geogate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geogate"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_FIG1B: &str = r#"
[numerics]
steps_per_period = 512

[fig1b]
omega0 = 7.745966692414834
coupling = 1.0
tau_min = 1.0
tau_max = 100.0
points = 4
"#;

const SMALL_VERIFY: &str = r#"
[verify]
oracle_omega0 = [1.0, 3.0]
oracle_omega1 = [-0.5, 1.0]
oracle_omega = [0.7, 2.0]
phase_law_chi = [0.4, 1.6, 2.8]
phase_law_field = 2.0
phase_law_omega = 1.0
device_tau_over_tau0 = [10.0]
random_pairs = 200
random_specs = 60

[verify.nmr]
omega0 = 1.2
omega1 = 0.3
omega = 0.9

[verify.device]
e1 = 1.5625
e2 = 6.25
ech = 39.0625
cos_chi0 = 0.75

[verify.fig1b]
omega0 = 7.745966692414834
coupling = 1.0
tau_min = 1.0
tau_max = 100.0
points = 2
"#;

#[test]
fn fig2b_writes_field_with_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = geogate(tmp.path(), &["fig2b", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("o/fig2b.csv")).unwrap();
    assert!(text.starts_with("# generator: geogate"));
    let mut data = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(data.next().unwrap(), "t,Bx,By,Bz");
    let first: Vec<f64> = data.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[1] - 7.8125).abs() < 1e-12);
    assert!(first[2].abs() < 1e-12);
}

#[test]
fn figure_output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_FIG1B);
    for dir in ["a", "b"] {
        let out = geogate(tmp.path(), &["fig1b", "--config", &cfg, "--out", dir]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(tmp.path().join("a/fig1b.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/fig1b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn json_format_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_FIG1B);
    let out = geogate(
        tmp.path(),
        &[
            "fig1b", "--config", &cfg, "--out", "o", "--format", "json", "--steps", "256", "--tol", "1e-11",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/fig1b.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["provenance"]["config"]["numerics"]["steps_per_period"], 256);
}

#[test]
fn gate_reports_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = geogate(tmp.path(), &["gate", "--out", "o", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gate: PASS"));
    assert!(tmp.path().join("o/gate.json").exists());
    assert!(tmp.path().join("o/gate_report.json").exists());
}

#[test]
fn small_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_VERIFY);
    let out = geogate(tmp.path(), &["verify", "--config", &cfg, "--out", "o"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout.contains("verify: PASS"));
    assert!(!stdout.contains("FAIL"));
    assert!(tmp.path().join("o/verify_report.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_FIG1B);
    let out = geogate(tmp.path(), &["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[sweep]"));

    let bad = write_config(tmp.path(), "[fig1b]\nomega0 = 1.0\n");
    assert_eq!(geogate(tmp.path(), &["fig1b", "--config", &bad]).status.code(), Some(2));

    let out = geogate(tmp.path(), &["fig1b", "--config", "does-not-exist.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let out = geogate(tmp.path(), &["fig1b", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_report_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL_VERIFY.replace("random_specs = 60\n", "random_specs = 60\nprobe_offset = 0.0\n"),
    );
    let out = geogate(tmp.path(), &["verify", "--config", &cfg, "--out", "o"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("FAIL negative control"));
    assert!(stdout.contains("verify: FAIL"));
}
