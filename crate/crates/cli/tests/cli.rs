//! End-to-end tests of the tollsim binary: generate -> run -> analyze ->
//! compare, plus flag handling and exit codes.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn tollsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tollsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = tollsim(args, cwd);
    assert!(
        out.status.success(),
        "tollsim {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn full_pipeline_generate_run_analyze_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    ok(
        &["generate", "two-route-cordon", "--out", "sc", "--persons", "80", "--iterations", "6"],
        cwd,
    );
    for f in ["network.json", "population.json", "config.json"] {
        assert!(cwd.join("sc").join(f).exists(), "missing {f}");
    }

    // a tiny run completes well within the smoke budget
    let started = Instant::now();
    ok(
        &["run", "--config", "sc/config.json", "--iterations", "1", "--out", "sc/run1"],
        cwd,
    );
    assert!(started.elapsed().as_secs() < 5, "single-iteration smoke run too slow");

    ok(&["run", "--config", "sc/config.json", "--out", "sc/with"], cwd);
    ok(
        &["run", "--config", "sc/config.json", "--out", "sc/without", "--no-toll"],
        cwd,
    );

    // tolled run charges; baseline does not
    let with_events = std::fs::read_to_string(cwd.join("sc/with/events.csv")).unwrap();
    let without_events = std::fs::read_to_string(cwd.join("sc/without/events.csv")).unwrap();
    assert!(with_events.contains(",money,"));
    assert!(!without_events.contains(",money,"));

    ok(&["analyze", "sc/with", "--hour", "8"], cwd);
    let analysis = cwd.join("sc/with/analysis");
    for f in [
        "link_volumes.csv",
        "pt_ridership.csv",
        "score_stats.csv",
        "cordon_entries.csv",
        "cordon_summary.csv",
        "volumes_h8.geojson",
    ] {
        assert!(analysis.join(f).exists(), "missing analysis output {f}");
    }

    ok(
        &["compare", "sc/without", "sc/with", "--out", "sc/cmp"],
        cwd,
    );
    for f in [
        "mode_share.csv",
        "score_stats.csv",
        "volume_deltas.csv",
        "cordon_deltas.csv",
        "summary.txt",
    ] {
        assert!(cwd.join("sc/cmp").join(f).exists(), "missing comparison output {f}");
    }

    // toll avoidance: strictly fewer cordon entries with pricing
    let deltas = std::fs::read_to_string(cwd.join("sc/cmp/cordon_deltas.csv")).unwrap();
    let entries = deltas
        .lines()
        .find(|l| l.starts_with("cordon_entries"))
        .unwrap();
    let fields: Vec<i64> = entries
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(
        fields[1] < fields[0],
        "expected fewer entries with pricing: {entries}"
    );
}

#[test]
fn rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    ok(
        &["generate", "pigou", "--out", "sc", "--persons", "60", "--iterations", "4"],
        cwd,
    );
    ok(&["run", "--config", "sc/config.json", "--out", "a"], cwd);
    ok(&["run", "--config", "sc/config.json", "--out", "b"], cwd);
    for f in ["events.csv", "iteration_stats.csv", "scores.csv", "population.json", "metadata.json"] {
        assert_eq!(
            std::fs::read(cwd.join("a").join(f)).unwrap(),
            std::fs::read(cwd.join("b").join(f)).unwrap(),
            "{f} not reproducible"
        );
    }
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();

    let unknown_kind = tollsim(&["generate", "hexagon", "--out", "x"], cwd);
    assert_eq!(unknown_kind.status.code(), Some(1));

    std::fs::write(
        cwd.join("bad.json"),
        r#"{"network":"missing.json","population":"missing.json","iterations":1}"#,
    )
    .unwrap();
    let missing = tollsim(&["run", "--config", "bad.json"], cwd);
    assert_eq!(missing.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert!(stderr.contains("missing.json"), "error should name the path: {stderr}");

    let incomplete = tollsim(&["analyze", "nonexistent_run"], cwd);
    assert_eq!(incomplete.status.code(), Some(1));
}

#[test]
fn toll_preset_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    ok(
        &["generate", "two-route-cordon", "--out", "sc", "--persons", "20", "--iterations", "2"],
        cwd,
    );
    // Remove the toll from the config, then reinstate it from the CLI.
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cwd.join("sc/config.json")).unwrap())
            .unwrap();
    config.as_object_mut().unwrap().remove("toll");
    std::fs::write(
        cwd.join("sc/config.json"),
        serde_json::to_string_pretty(&config).unwrap(),
    )
    .unwrap();

    ok(&["run", "--config", "sc/config.json", "--out", "plain"], cwd);
    ok(
        &["run", "--config", "sc/config.json", "--out", "preset", "--toll-preset", "nyc-cbd-base"],
        cwd,
    );
    let plain = std::fs::read_to_string(cwd.join("plain/events.csv")).unwrap();
    let preset = std::fs::read_to_string(cwd.join("preset/events.csv")).unwrap();
    assert!(!plain.contains(",money,"));
    assert!(preset.contains(",money,"));

    let bad = tollsim(
        &["run", "--config", "sc/config.json", "--toll-preset", "unknown-preset"],
        cwd,
    );
    assert_eq!(bad.status.code(), Some(1));
}
