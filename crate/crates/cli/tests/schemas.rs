use phonon_lab::config::Scenario;
use phonon_lab::record::{run_to_dir, RECORD_FILE};
use phonon_lab::reproduce::reproduce;
use serde_json::Value;
use std::path::Path;

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    let value: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&value).unwrap()
}

fn load(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, instance: &Value, what: &str) {
    let errors: Vec<String> = v.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{what}: {errors:#?}");
}

const SMALL_WIGNER: &str = r#"{"kind":"wigner","seed":5,"params":{"state":"one","t_points":51,"map_points":11,"mc_samples":50}}"#;

#[test]
fn shipped_configs_match_scenario_schema() {
    let v = schema("scenario.v1.json");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        assert_valid(&v, &load(&path), &path.display().to_string());
        Scenario::from_path(&path).unwrap();
        n += 1;
    }
    assert!(n >= 9);
}

#[test]
fn resolved_snapshots_match_scenario_schema() {
    let v = schema("scenario.v1.json");
    for kind in phonon_lab::config::KINDS {
        let s = Scenario::from_json(&format!(r#"{{"kind":"{kind}"}}"#), "t").unwrap();
        assert_valid(&v, &s.snapshot(), kind);
    }
    let bad: Value =
        serde_json::from_str(r#"{"kind":"chevron","params":{"tau_max":"long"}}"#).unwrap();
    assert!(!v.is_valid(&bad));
    let bad: Value = serde_json::from_str(r#"{"kind":"chevron","params":{"nope":1}}"#).unwrap();
    assert!(!v.is_valid(&bad));
}

#[test]
fn wigner_run_artifacts_match_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let s = Scenario::from_json(SMALL_WIGNER, "t").unwrap();
    run_to_dir(&s, tmp.path()).unwrap();
    assert_valid(
        &schema("run-record.v1.json"),
        &load(&tmp.path().join(RECORD_FILE)),
        "record",
    );
    assert_valid(
        &schema("summary.v1.json"),
        &load(&tmp.path().join("summary.json")),
        "summary",
    );
    assert_valid(
        &schema("dataset.v1.json"),
        &load(&tmp.path().join("dataset.json")),
        "dataset",
    );
    assert_valid(
        &schema("reconstruction-report.v1.json"),
        &load(&tmp.path().join("reconstruction.json")),
        "report",
    );
}

#[test]
fn comparison_matches_schema() {
    let tmp = tempfile::tempdir().unwrap();
    reproduce("fig4a", tmp.path()).unwrap();
    assert_valid(
        &schema("comparison.v1.json"),
        &load(&tmp.path().join("comparison.json")),
        "cmp",
    );
    let rec = load(&tmp.path().join("thermometry").join(RECORD_FILE));
    assert_valid(&schema("run-record.v1.json"), &rec, "record");
    assert_valid(&schema("scenario.v1.json"), &rec["scenario"], "scenario");
}
