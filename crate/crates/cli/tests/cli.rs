use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(file)
}

fn geomech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomech")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_series_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = geomech(&["run", s(&scenario("free_body.json")), "--out-dir", s(dir.path()), "--t-final", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("free_body.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 101);
    assert!(csv.starts_with("t,"));
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("free_body.metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["steps"], 100);
    assert_eq!(metrics["kind"], "free_body");
    assert!(metrics["settling_time_5pct"].is_null());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = geomech(&[
        "run",
        s(&scenario("quad_track.json")),
        "--out-dir",
        s(dir.path()),
        "--dt",
        "0.01",
        "--t-final",
        "0.5",
        "--aero",
        "on",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("quad_track.metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["dt"], 0.01);
    assert_eq!(metrics["steps"], 50);
    assert_eq!(metrics["aero_enabled"], true);
}

#[test]
fn compare_writes_paired_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = geomech(&["compare", s(&scenario("free_body.json")), "--out-dir", s(dir.path()), "--t-final", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(dir.path().join("free_body_compare.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.contains("vi_H") && header.contains("rk4_H"));
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("free_body_compare.metrics.json")).unwrap()).unwrap();
    assert!(metrics["comparison"]["rk4_energy_drift_max_rel"].is_number());
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for file in ["free_body.json", "attitude_track.json", "quad_track.json"] {
        for d in [&a, &b] {
            let out = geomech(&["run", s(&scenario(file)), "--out-dir", s(d.path()), "--t-final", "2"]);
            assert_eq!(out.status.code(), Some(0), "{file}");
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for file in ["free_body.json", "integrator_compare.json", "attitude_track.json", "quad_track.json", "quad_track_tuned.json"] {
        let out = geomech(&["validate", s(&scenario(file))]);
        assert_eq!(out.status.code(), Some(0), "{file}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn invalid_scenarios_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.json", r#"{"kind": "free_body", "dt": 0.01,"#),
        ("unknown.json", r#"{"kind": "free_body", "dt": 0.01, "t_final": 1, "inertia": 1, "colour": "red"}"#),
        ("zero_dt.json", r#"{"kind": "free_body", "dt": 0, "t_final": 1, "inertia": [3, 2, 1]}"#),
        ("not_spd.json", r#"{"kind": "free_body", "dt": 0.01, "t_final": 1, "inertia": [3, -2, 1]}"#),
    ];
    for (name, text) in cases {
        let p = write(dir.path(), name, text);
        let runs = [geomech(&["validate", s(&p)]), geomech(&["run", s(&p), "--out-dir", s(dir.path())])];
        for out in runs {
            assert_eq!(out.status.code(), Some(2), "{name}");
            assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
        }
    }
    assert!(!dir.path().join("zero_dt.csv").exists());
}

#[test]
fn validation_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "many.json", r#"{"kind": "free_body", "dt": -1, "t_final": -2, "inertia": [1, 1, 5]}"#);
    let err = String::from_utf8(geomech(&["validate", s(&p)]).stderr).unwrap();
    for field in ["dt", "t_final", "inertia"] {
        assert!(err.contains(field), "{field} missing from: {err}");
    }
}

#[test]
fn solver_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "stiff.json",
        r#"{"kind": "free_body", "dt": 1.0, "t_final": 5.0, "inertia": [3, 2, 1],
            "initial": {"omega": [10, 7, 5]}, "solver": {"max_iters": 2}}"#,
    );
    let out = geomech(&["run", s(&p), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step 0"), "{err}");
}

#[test]
fn unnamed_scenario_uses_file_stem() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "spin-test.json", r#"{"kind": "free_body", "dt": 0.1, "t_final": 0.5, "inertia": [3, 2, 1]}"#);
    assert_eq!(geomech(&["run", s(&p), "--out-dir", s(dir.path())]).status.code(), Some(0));
    assert!(dir.path().join("spin-test.csv").exists());
    assert!(dir.path().join("spin-test.metrics.json").exists());
}

#[test]
fn aero_switch_needs_a_rotor_model() {
    let out = geomech(&["validate", s(&scenario("free_body.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let out = geomech(&["run", s(&scenario("free_body.json")), "--out-dir", s(dir.path()), "--aero", "on"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("aero"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let out = geomech(&["run", s(&scenario("free_body.json")), "--aero", "maybe"]);
    assert_eq!(out.status.code(), Some(2));
    let out = geomech(&["run", s(&scenario("free_body.json")), "--dt", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = geomech(&["validate", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(1));
}
