use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], jobs: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phonon-lab"));
    cmd.args(args).env_remove("PHONON_LAB_JOBS");
    if let Some(j) = jobs {
        cmd.env("PHONON_LAB_JOBS", j);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn empty_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "empty.json", "{}");
    let out = lab(&["validate", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("`kind`") && err.contains("large-alpha"),
        "{err}"
    );
}

#[test]
fn bad_field_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        "{\n  \"kind\": \"fock2\",\n  \"params\": {\n    \"tau_points\": -3\n  }\n}\n",
    );
    let out = lab(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("bad.json:4:") && err.contains("params.tau_points"),
        "{err}"
    );
}

#[test]
fn unknown_figure_lists_supported_ids() {
    let out = lab(&["reproduce", "fig7"], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for id in phonon_lab::reproduce::FIGURES {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn run_writes_artifacts_and_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.json",
        r#"{"kind":"thermometry","seed":1,"params":{"points":41}}"#,
    );
    let dir = tmp.path().join("out");
    let out = lab(
        &[
            "run",
            &cfg,
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "12",
            "--jobs",
            "2",
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["rabi.csv", "summary.json", "run_record.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run_record.json")).unwrap())
            .unwrap();
    assert_eq!(rec["seed"], 12);
    assert_eq!(rec["scenario"]["params"]["points"], 41);
}

#[test]
fn jobs_from_environment_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", r#"{"kind":"thermometry"}"#);
    let dir = tmp.path().join("out");
    let ok = lab(&["run", &cfg, "--out", dir.to_str().unwrap()], Some("2"));
    assert!(ok.status.success());
    let bad = lab(&["run", &cfg, "--out", dir.to_str().unwrap()], Some("0"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    // Four flux points cannot constrain the three fitted inductances.
    let cfg = write(
        tmp.path(),
        "t.json",
        r#"{"kind":"coupling-sweep","params":{"points":4,"fit":true}}"#,
    );
    let out = lab(
        &["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
