//! End-to-end checks of the command-line surface: exit codes, output
//! files, and cross-file consistency of the exports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/configs/{name}.json"))
}

fn iaqsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iaqsim"))
        .args(args)
        .output()
        .expect("spawn iaqsim")
}

fn run_ok(args: &[&str]) -> String {
    let output = iaqsim(args);
    assert!(
        output.status.success(),
        "iaqsim {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf8 stdout")
}

#[test]
fn run_exports_all_documents() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let config = fixture_path("baseline");
    let stdout = run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "42",
        "--out",
        out,
        "--densify",
        "5",
    ]);
    for file in [
        "history.json",
        "places.csv",
        "persons.csv",
        "metrics.json",
        "places_densified.csv",
    ] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
    assert!(stdout.contains("reproduce with: iaqsim run"), "{stdout}");
    assert!(stdout.contains("meeting"), "summary lists place categories: {stdout}");

    // identical invocation reproduces the history byte for byte
    let second = tempfile::tempdir().unwrap();
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "42",
        "--out",
        second.path().to_str().unwrap(),
    ]);
    let first_history = std::fs::read(dir.path().join("history.json")).unwrap();
    let second_history = std::fs::read(second.path().join("history.json")).unwrap();
    assert_eq!(first_history, second_history);
}

#[test]
fn densified_grid_hits_snapshot_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_path("baseline");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
        "--densify",
        "5",
    ]);
    let places = std::fs::read_to_string(dir.path().join("places.csv")).unwrap();
    let densified = std::fs::read_to_string(dir.path().join("places_densified.csv")).unwrap();

    // last snapshot per (place, time) must appear verbatim in the dense grid
    let mut snapshots: std::collections::HashMap<(String, String), (String, String)> =
        std::collections::HashMap::new();
    for line in places.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        snapshots.insert(
            (cells[0].to_string(), cells[1].to_string()),
            (cells[4].to_string(), cells[5].to_string()),
        );
    }
    let mut matched = 0;
    for line in densified.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if let Some((co2, quanta)) = snapshots.get(&(cells[0].to_string(), cells[1].to_string())) {
            assert_eq!(cells[2], co2, "co2 mismatch at {line}");
            assert_eq!(cells[3], quanta, "quanta mismatch at {line}");
            matched += 1;
        }
    }
    assert!(matched > 100, "only {matched} boundary points matched");
}

#[test]
fn missing_config_exits_one_with_path() {
    let output = iaqsim(&["run", "--config", "no-such-file.json"]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("no-such-file.json"), "{stderr}");
}

#[test]
fn invalid_config_exits_one_naming_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(fixture_path("baseline")).unwrap();
    std::fs::write(&bad, text.replace("\"area\": 330,", "\"area\": 0,")).unwrap();
    let output = iaqsim(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("area"), "{stderr}");
}

#[test]
fn batch_compare_and_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for name in ["baseline", "natural-ventilation"] {
        let stdout = run_ok(&[
            "batch",
            "--config",
            fixture_path(name).to_str().unwrap(),
            "--runs",
            "30",
            "--base-seed",
            "11",
            "--out",
            out,
        ]);
        assert!(stdout.contains(&format!("batch: {name}")));
        assert!(dir.path().join(format!("{name}.experiment.json")).exists());
        assert!(dir.path().join(format!("{name}.manifest.json")).exists());
    }
    let baseline = dir.path().join("baseline.experiment.json");
    let experiment = dir.path().join("natural-ventilation.experiment.json");
    let stdout = run_ok(&[
        "compare",
        "--baseline",
        baseline.to_str().unwrap(),
        "--experiment",
        experiment.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert!(stdout.contains("volume_weighted_max_co2"));
    assert!(dir.path().join("comparison.json").exists());

    run_ok(&[
        "plot",
        "--experiment",
        experiment.to_str().unwrap(),
        "--baseline",
        baseline.to_str().unwrap(),
        "--out",
        out,
    ]);
    for chart in [
        "ridges_place_max_co2.svg",
        "ridges_place_max_quanta.svg",
        "building_co2_density.svg",
        "building_quanta_density.svg",
    ] {
        let svg = std::fs::read_to_string(dir.path().join(chart)).unwrap();
        assert!(svg.starts_with("<svg"), "{chart}");
        assert!(svg.trim_end().ends_with("</svg>"), "{chart}");
    }
}

#[test]
fn compare_rejects_mismatched_entities_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for name in ["baseline", "separate-workspaces"] {
        run_ok(&[
            "batch",
            "--config",
            fixture_path(name).to_str().unwrap(),
            "--runs",
            "10",
            "--base-seed",
            "3",
            "--out",
            out,
        ]);
    }
    let baseline = dir.path().join("baseline.experiment.json");
    let experiment = dir.path().join("separate-workspaces.experiment.json");
    let output = iaqsim(&[
        "compare",
        "--baseline",
        baseline.to_str().unwrap(),
        "--experiment",
        experiment.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("open_office"), "differences listed: {stderr}");

    // the intersection mode compares the shared entities instead
    let stdout = run_ok(&[
        "compare",
        "--baseline",
        baseline.to_str().unwrap(),
        "--experiment",
        experiment.to_str().unwrap(),
        "--intersect",
        "--out",
        out,
    ]);
    assert!(stdout.contains("building"));
}

#[test]
fn validate_emits_trace_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(&["validate", "--out", dir.path().to_str().unwrap()]);
    assert!(stdout.contains("start 415 ppm"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert!(csv.starts_with("time,co2_ppm,occupants"));
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("420,415,0"), "{first}");
    assert!(dir.path().join("validate.svg").exists());
}

#[test]
fn plot_on_zero_agent_run_is_flat_but_valid() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.json");
    let text = std::fs::read_to_string(fixture_path("baseline")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["people"] = serde_json::json!([]);
    doc["options"]["n_infected"] = serde_json::json!(0);
    doc["options"]["initial_occupancy"] = serde_json::json!({});
    std::fs::write(&config, serde_json::to_string(&doc).unwrap()).unwrap();

    let out = dir.path().to_str().unwrap();
    run_ok(&["run", "--config", config.to_str().unwrap(), "--out", out]);
    run_ok(&[
        "plot",
        "--history",
        dir.path().join("history.json").to_str().unwrap(),
        "--out",
        out,
    ]);
    let svg = std::fs::read_to_string(dir.path().join("timeline_co2.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 14, "one flat line per place");
}

#[test]
fn usage_error_reports_exit_one() {
    let output = iaqsim(&["plot"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn out_dir_env_variable_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_iaqsim"))
        .args(["validate"])
        .env("IAQSIM_OUT_DIR", dir.path())
        .output()
        .expect("spawn");
    assert!(output.status.success());
    assert!(Path::new(&dir.path().join("validate.csv")).exists());
}
