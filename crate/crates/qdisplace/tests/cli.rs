//! Contract tests for the `qdisplace` binary: exit codes, report
//! round-trips, and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn qdisplace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdisplace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn behavior_of_builtins() {
    let out = qdisplace(&["behavior", "--builtin", "rabelo-original"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["cells"].as_array().unwrap().len(), 12);

    let out = qdisplace(&["behavior", "--builtin", "bancal-unentangled"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let rounds: Vec<&str> = doc["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["round"].as_str().unwrap())
        .collect();
    assert!(rounds.contains(&"send"));
    assert!(rounds.contains(&"selftest"));
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "broken.json", "{ not json");
    let out = qdisplace(&["behavior", "--scenario", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let out = qdisplace(&["behavior", "--builtin", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_builtins_and_roundtrip() {
    let out = qdisplace(&["compare", "rabelo-original", "rabelo-displaced"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["verdict"], "equivalent");

    let out = qdisplace(&["compare", "bancal-reference", "bancal-classical"]);
    assert_eq!(out.status.code(), Some(0));

    // Emitted behavior JSON re-ingested against itself: TV is exactly 0.
    let dir = tempfile::tempdir().unwrap();
    let table = stdout_of(&qdisplace(&["behavior", "--builtin", "rabelo-original"]));
    let path = write(dir.path(), "behavior.json", &table);
    let out = qdisplace(&["compare", &path, &path, "--tol", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["max_tv"], "0.00000000000000e0");
}

#[test]
fn mislabeled_variant_is_inequivalent() {
    // Permute Charlie's Bell labels in a dumped scenario document.
    use qdisplace::scenario::build_builtin;
    let mut sc = build_builtin("rabelo-original").unwrap();
    for class in &mut sc.rounds[0].slots[1].settings[2].classes {
        class.label = match class.label.as_str() {
            "Phi+" => "Phi-".to_string(),
            "Phi-" => "Phi+".to_string(),
            other => other.to_string(),
        };
    }
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "mislabeled.json", &sc.to_json());
    let out = qdisplace(&["compare", "rabelo-original", &path]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["verdict"], "inequivalent");
}

#[test]
fn dump_scenario_is_reingestible() {
    let dumped = stdout_of(&qdisplace(&[
        "behavior",
        "--builtin",
        "rabelo-displaced",
        "--dump-scenario",
    ]));
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "scenario.json", &dumped);
    let out = qdisplace(&["compare", "rabelo-displaced", &path]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn localize_reports() {
    let out = qdisplace(&[
        "localize",
        "--measurement",
        "bsm",
        "--levels",
        "2",
        "--mode",
        "branching",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["success_probability_exact"], "19/64");
    assert_eq!(report["results"]["ancilla_pairs"], 15);

    let out = qdisplace(&[
        "localize",
        "--measurement",
        "computational",
        "--levels",
        "1",
        "--mode",
        "deferred",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["success_probability_exact"], "1/4");
    assert_eq!(report["results"]["ancilla_pairs"], 3);

    // deferred mode is capped at level 1
    let out = qdisplace(&[
        "localize",
        "--measurement",
        "bsm",
        "--levels",
        "2",
        "--mode",
        "deferred",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn localize_accepts_measurement_and_state_files() {
    let dir = tempfile::tempdir().unwrap();
    // The Bell basis as an explicit eigenvector matrix with class labels.
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let measurement = serde_json::json!({
        "eigenvectors": [
            [[h, 0.0], [0.0, 0.0], [0.0, 0.0], [h, 0.0]],
            [[0.0, 0.0], [h, 0.0], [h, 0.0], [0.0, 0.0]],
            [[h, 0.0], [0.0, 0.0], [0.0, 0.0], [-h, 0.0]],
            [[0.0, 0.0], [h, 0.0], [-h, 0.0], [0.0, 0.0]],
        ],
        "classes": [
            {"label": "Phi+", "members": [0]},
            {"label": "Psi+", "members": [1]},
            {"label": "Phi-", "members": [2]},
            {"label": "Psi-", "members": [3]},
        ],
    });
    let m_path = write(dir.path(), "bsm.json", &measurement.to_string());
    let state = serde_json::json!({
        "amplitudes": [[h, 0.0], [0.0, 0.0], [0.0, 0.0], [h, 0.0]],
    });
    let s_path = write(dir.path(), "phi.json", &state.to_string());
    let out = qdisplace(&[
        "localize",
        "--measurement",
        &m_path,
        "--state",
        &s_path,
        "--levels",
        "1",
        "--mode",
        "deferred",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    // measuring Φ⁺ in the Bell basis is deterministic given success
    assert_eq!(
        report["results"]["conditional_distribution"]["Phi+"],
        "1.00000000000000e0"
    );
}

#[test]
fn identical_seeds_give_identical_reports() {
    let args = [
        "localize",
        "--measurement",
        "random",
        "--levels",
        "1",
        "--mode",
        "branching",
        "--state",
        "random",
        "--seed",
        "5",
    ];
    let first = stdout_of(&qdisplace(&args));
    let second = stdout_of(&qdisplace(&args));
    assert_eq!(first, second);
    let other = stdout_of(&qdisplace(&[
        "localize",
        "--measurement",
        "random",
        "--levels",
        "1",
        "--mode",
        "branching",
        "--state",
        "random",
        "--seed",
        "6",
    ]));
    assert_ne!(first, other);
}

#[test]
fn spacetime_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let doc = qdisplace::spacetime::bancal_events();
    let path = write(
        dir.path(),
        "events.json",
        &serde_json::to_string_pretty(&doc).unwrap(),
    );
    let out = qdisplace(&["spacetime", "--events", &path]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["paths"].as_array().unwrap().len(), 4);

    let mut moved = doc.clone();
    moved
        .instrument_sites
        .insert("C_A".into(), vec!["CA".into(), "CB".into()]);
    moved.instrument_sites.remove("C");
    let path = write(
        dir.path(),
        "moved.json",
        &serde_json::to_string_pretty(&moved).unwrap(),
    );
    let out = qdisplace(&["spacetime", "--events", &path]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["violations"].as_array().unwrap().len(), 1);

    // single-event file: one zero-length path
    let single = qdisplace::spacetime::EventsDoc {
        events: vec![qdisplace::spacetime::Event::new("E", 0.0, &[0.0])],
        instrument_sites: Default::default(),
        site_factors: Default::default(),
    };
    let path = write(
        dir.path(),
        "single.json",
        &serde_json::to_string_pretty(&single).unwrap(),
    );
    let out = qdisplace(&["spacetime", "--events", &path]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["results"]["paths"].as_array().unwrap().len(), 1);
}

#[test]
fn dense_cap_env_var_is_honored() {
    let out = Command::new(env!("CARGO_BIN_EXE_qdisplace"))
        .args(["behavior", "--builtin", "rabelo-original"])
        .env("QDISPLACE_MAX_QUBITS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dense cap"));

    let out = Command::new(env!("CARGO_BIN_EXE_qdisplace"))
        .args(["behavior", "--builtin", "rabelo-original"])
        .env("QDISPLACE_MAX_QUBITS", "8")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
