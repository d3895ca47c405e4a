use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use weakkam_core::{GridFunction, PeriodicGrid};

fn weakkam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakkam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    format!("output_dir={}", dir.display())
}

const FREE_MODEL: &str = r#"model={"kind":"mechanical","potential":{"type":"zero"}}"#;

#[test]
fn critical_on_free_lagrangian_reports_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = weakkam(&[
        "critical",
        "--set",
        FREE_MODEL,
        "--set",
        "grid.dims=[64]",
        "--set",
        &out_arg(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path());
    assert_eq!(s["results"]["report"]["c_karp"].as_f64(), Some(0.0));
    assert!(s["results"]["report"]["c_est"].as_f64().unwrap().abs() <= 1e-9);
}

#[test]
fn pendulum_demo_reports_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let o = weakkam(&["pendulum-demo", "--set", &out_arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path());
    let sup = s["results"]["sup_norm"].as_f64().unwrap();
    assert!(sup.is_finite() && sup > 0.0);
    assert!((s["results"]["c_karp"].as_f64().unwrap() - 1.0).abs() <= 0.02);
    let text = fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
    assert_eq!(text.lines().count(), 257);
}

#[test]
fn zero_dt_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = weakkam(&["solve", "--set", "dt=0", "--set", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`dt`"), "{err}");
    assert!(!tmp.path().join("summary.json").exists());
}

#[test]
fn unknown_keys_and_bad_files_are_rejected() {
    let o = weakkam(&["solve", "--set", "dtt=0.1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = weakkam(&["solve", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn iteration_cap_is_non_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let o = weakkam(&["solve", "--set", "max_iter=3", "--set", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_are_deterministic_and_headed() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "mather",
        "--set",
        "grid.dims=[64]",
        "--set",
        "seed_amplitude=0.5",
        "--set",
        "seed=7",
    ];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let mut a: Vec<&str> = args.to_vec();
        let out = out_arg(tmp.path());
        a.extend(["--set", &out]);
        let o = weakkam(&a);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(tmp.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        snapshots.push(files);
    }
    assert_eq!(snapshots[0], snapshots[1]);
    for (name, bytes) in &snapshots[0] {
        if name.ends_with(".csv") {
            let first = String::from_utf8_lossy(bytes).lines().next().unwrap_or("").to_string();
            assert!(
                first.split(',').all(|c| c.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic())),
                "{name}: {first}"
            );
        }
    }
    let s = summary(tmp.path());
    assert_eq!(s["results"]["mather_set"], serde_json::json!([0]));
    assert_eq!(s["results"]["set_invariant"], Value::Bool(true));
}

#[test]
fn tabulated_potential_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = PeriodicGrid::circle(64, std::f64::consts::TAU).unwrap();
    let pot = GridFunction::from_fn(&grid, |x| x[0].cos()).unwrap();
    pot.write_csv(fs::File::create(tmp.path().join("potential.csv")).unwrap())
        .unwrap();
    let cfg = r#"{
        "model": {"kind": "mechanical", "potential": {"type": "tabulated", "path": "potential.csv"}},
        "grid": {"dims": [64], "lengths": [6.283185307179586]},
        "dt": 0.1,
        "vmax": 3.0,
        "output_dir": "run"
    }"#;
    fs::write(tmp.path().join("config.json"), cfg).unwrap();
    let cfg_path = tmp.path().join("config.json");
    let o = weakkam(&["critical", "--config", cfg_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&tmp.path().join("run"));
    assert!((s["results"]["report"]["c_karp"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn symmetry_check_on_torus_reports_harness() {
    let tmp = tempfile::tempdir().unwrap();
    let o = weakkam(&[
        "symmetry-check",
        "--set",
        r#"grid={"dims":[12,12],"lengths":[6.283185307179586,6.283185307179586]}"#,
        "--set",
        r#"symmetry=[{"type":"shift","axis":1}]"#,
        "--set",
        "dt=0.2",
        "--set",
        "vmax=3",
        "--set",
        "options.harness_seeds=2",
        "--set",
        &out_arg(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path());
    assert_eq!(s["results"]["group_order"].as_u64(), Some(12));
    assert_eq!(s["results"]["kernel_deviation"].as_f64(), Some(0.0));
    assert_eq!(s["results"]["averaging"]["violations_after"].as_u64(), Some(0));
    assert_eq!(s["results"]["harness"]["kind"], "connected-analog");
    let trials = fs::read_to_string(tmp.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
}
