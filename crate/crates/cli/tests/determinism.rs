use phonon_lab::config::Scenario;
use phonon_lab::record::{run_to_dir, RECORD_FILE};
use std::collections::BTreeMap;
use std::path::Path;

fn files(dir: &Path) -> Files {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != RECORD_FILE)
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

type Files = BTreeMap<String, Vec<u8>>;

fn twice(config: &str) -> (Files, Files, String, String) {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s = Scenario::from_json(config, "t").unwrap();
    let (_, ra) = run_to_dir(&s, a.path()).unwrap();
    let (_, rb) = run_to_dir(&s, b.path()).unwrap();
    (
        files(a.path()),
        files(b.path()),
        ra.content_hash,
        rb.content_hash,
    )
}

#[test]
fn same_seed_gives_identical_bytes() {
    for config in [
        r#"{"kind":"thermometry","seed":9}"#,
        r#"{"kind":"wigner","seed":9,"params":{"t_points":41,"map_points":9,"mc_samples":40}}"#,
        r#"{"kind":"coupling-sweep","seed":9,"params":{"points":41,"fit":true,"fit_noise_hz":1e6}}"#,
        r#"{"kind":"chevron","params":{"delta_points":3,"tau_max":1e-7,"tau_points":51}}"#,
    ] {
        let (a, b, ha, hb) = twice(config);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{config}");
        assert_eq!(ha, hb, "{config}");
    }
}

#[test]
fn seed_changes_noisy_outputs() {
    let (a, _, ha, _) = twice(r#"{"kind":"thermometry","seed":1}"#);
    let (b, _, hb, _) = twice(r#"{"kind":"thermometry","seed":2}"#);
    assert_ne!(a["rabi.csv"], b["rabi.csv"]);
    assert_ne!(ha, hb);
}

#[test]
fn worker_count_does_not_change_results() {
    let s = Scenario::from_json(
        r#"{"kind":"wigner","seed":4,"params":{"t_points":41,"map_points":9,"mc_samples":40}}"#,
        "t",
    )
    .unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| phonon_lab::scenarios::execute(&s)).unwrap();
    let b = four.install(|| phonon_lab::scenarios::execute(&s)).unwrap();
    assert_eq!(a, b);
}
