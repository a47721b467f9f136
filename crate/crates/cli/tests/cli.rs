use std::fs;
use std::path::Path;
use std::process::Command;

use sdwave::output::{parse_csv, read_snapshots};
use sdwave::{parse_config, run};
use sdwave_core::dynamics::simulate_from;
use sdwave_core::SolverConfig;

fn config(experiment: &str, extra: &str) -> String {
    format!(
        r#"{{
            "model": {{ "dimension": 1, "modes_per_dim": 8 }},
            "solver": {{ "dt": 0.005, "horizon": 1.0, "snapshot_stride": 20 }},
            "experiment": {experiment},
            "output": {{ "formats": ["csv", "json", "binary"] }}{extra}
        }}"#
    )
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn zero_data_gives_zero_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&config(r#"{ "kind": "simulate" }"#, "")).unwrap();
    let manifest = run(&cfg, dir.path()).unwrap();
    assert!(manifest.passed);
    let rows = parse_csv(&fs::read_to_string(dir.path().join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        assert!(row[1..].iter().all(|c| *c == Some(0.0)), "{row:?}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn linear_decay_of_one_mode() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": { "dimension": 1, "modes_per_dim": 1 },
        "experiment": { "kind": "linear-decay", "probes": 16 },
        "output": { "formats": ["json"] }
    }"#;
    let manifest = run(&parse_config(text).unwrap(), dir.path()).unwrap();
    assert!(manifest.passed);
    assert!((manifest.summary["fitted_rate"] - 0.5).abs() < 0.01);
    assert_eq!(manifest.summary["analytic_rate"], 0.5);
}

#[test]
fn energy_audit_records_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&config(
        r#"{ "kind": "audit-energy", "initial": { "kind": "random", "radius": 1.0 }, "levels": 3 }"#,
        "",
    ))
    .unwrap();
    let manifest = run(&cfg, dir.path()).unwrap();
    assert!(manifest.passed, "{:?}", manifest.verdicts);
    assert!(manifest.summary["order_estimate"] > 1.8);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = parse_config(&config(r#"{ "kind": "simulate", "initial": { "kind": "random", "radius": 2.0 } }"#, r#", "seed": 5"#)).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();
    for name in ["trajectory.csv", "report.json", "snapshots.bin"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn restart_from_snapshot_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&config(r#"{ "kind": "simulate", "initial": { "kind": "random", "radius": 1.0 } }"#, "")).unwrap();
    run(&cfg, dir.path()).unwrap();
    let snaps = read_snapshots(&dir.path().join("snapshots.bin"), 1.5).unwrap();
    assert_eq!(snaps.times.len(), 11);
    let model = cfg.model_spec().unwrap();
    let mid = 5;
    let rest = SolverConfig::new(0.005, 0.5).with_stride(20);
    let rec = simulate_from(&model, &snaps.states[mid], snaps.times[mid], &rest).unwrap();
    assert_eq!(rec.last(), snaps.states.last().unwrap());
}

#[test]
fn exit_status_reflects_verdicts() {
    let bin = env!("CARGO_BIN_EXE_sdwave");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let ok = write_config(dir.path(), &config(r#"{ "kind": "simulate" }"#, ""));
    let status = Command::new(bin).arg("run").arg(&ok).arg("--output").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("manifest.json").exists());

    // the r/δ ladder of a smooth flow spans a factor 2^(ladder−1)
    let failing = write_config(
        dir.path(),
        &config(r#"{ "kind": "compare", "initial": { "kind": "random", "radius": 1.0 }, "ladder": 5 }"#, ""),
    );
    let status = Command::new(bin).arg("run").arg(&failing).arg("--output").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let bad = write_config(dir.path(), &config(r#"{ "kind": "simulate" }"#, "").replace("0.005", "-1"));
    let output = Command::new(bin).arg("validate").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("solver.dt"));
}
