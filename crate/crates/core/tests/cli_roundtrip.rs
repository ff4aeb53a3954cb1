use std::fs;
use std::path::Path;
use std::process::Command;

use priste::commands::run;
use priste::config::{Mode, RunConfig};
use priste::event::{write_events, Event, GridMap, Region};
use priste::lppm::PlanarLaplace;
use priste::runtime::{read_run_log, read_summary};
use priste::simkit::write_trajectory_csv;

fn write_small_inputs(dir: &Path) -> RunConfig {
    let map = GridMap::new(4, 4, 0.5).unwrap();
    let events = dir.join("events.json");
    write_events(
        &events,
        &[Event::presence(Region::from_cells(16, &[0, 1, 4]).unwrap(), 2, 3).unwrap()],
    )
    .unwrap();
    let emissions = dir.join("emissions.csv");
    let e = PlanarLaplace::new(1.0, map).unwrap().emission_matrix();
    let text: Vec<String> = e
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(","))
        .collect();
    fs::write(&emissions, text.join("\n")).unwrap();
    let observations = dir.join("observed.csv");
    write_trajectory_csv(&observations, &[0, 1, 5, 10, 15]).unwrap();
    RunConfig {
        width: 4,
        height: 4,
        cell_size: 0.5,
        sigma: 0.6,
        horizon: 8,
        runs: 3,
        events: Some(events),
        emissions: Some(emissions),
        observations: Some(observations),
        out: dir.join("out"),
        instances: 20,
        ..Default::default()
    }
}

#[test]
fn quantify_writes_one_row_per_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        mode: Mode::Quantify,
        ..write_small_inputs(dir.path())
    };
    let outcome = run(&config).unwrap();
    assert_eq!(outcome.failures, 0);
    let mut r = csv::Reader::from_path(config.out.join("leakage.csv")).unwrap();
    let rows: Vec<priste::commands::LeakageRow> = r.deserialize().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows
        .iter()
        .all(|x| x.leakage_ratio >= 1.0 && (0.0..=1.0).contains(&x.posterior)));
    assert!(rows.windows(2).all(|w| w[0].prior == w[1].prior));
}

#[test]
fn release_modes_write_logs_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [Mode::ReleaseGeoind, Mode::ReleaseDeltaloc] {
        let config = RunConfig {
            mode,
            ..write_small_inputs(dir.path())
        };
        let outcome = run(&config).unwrap();
        assert_eq!(outcome.failures, 0, "{}", outcome.report);
        let summary = read_summary(config.out.join("summary.csv")).unwrap();
        assert_eq!(summary.len(), 8);
        for k in 0..3 {
            let log = read_run_log(config.out.join(format!("internal/run_{k:03}.csv"))).unwrap();
            assert_eq!(log.len(), 8);
            let released = fs::read_to_string(config.out.join(format!("released/run_{k:03}.csv"))).unwrap();
            assert!(released.starts_with("t,cell\n"));
            assert!(!released.contains("true_cell"));
        }
        let replay: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(config.out.join("replay.json")).unwrap()).unwrap();
        assert_eq!(replay["checks"], 24);
    }
}

#[test]
fn fixed_trajectory_is_replayed_in_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let trajectory = dir.path().join("trace.csv");
    write_trajectory_csv(&trajectory, &[3, 2, 6, 7, 11]).unwrap();
    let config = RunConfig {
        trajectory: Some(trajectory),
        ..write_small_inputs(dir.path())
    };
    run(&config).unwrap();
    for k in 0..3 {
        let log = read_run_log(config.out.join(format!("internal/run_{k:03}.csv"))).unwrap();
        assert_eq!(
            log.iter().map(|r| r.true_cell).collect::<Vec<_>>(),
            vec![3, 2, 6, 7, 11]
        );
    }
}

#[test]
fn oracle_compare_reports_no_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        mode: Mode::OracleCompare,
        ..write_small_inputs(dir.path())
    };
    let outcome = run(&config).unwrap();
    assert_eq!(outcome.failures, 0);
    let text = fs::read_to_string(config.out.join("oracle.csv")).unwrap();
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn binary_flags_override_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_inputs(dir.path());
    let manifest = dir.path().join("run.toml");
    fs::write(&manifest, toml::to_string(&config).unwrap()).unwrap();
    let out = dir.path().join("flag-out");
    let status = Command::new(env!("CARGO_BIN_EXE_priste"))
        .args([
            "--config",
            manifest.to_str().unwrap(),
            "--mode",
            "release-deltaloc",
            "--runs",
            "2",
        ])
        .args([
            "--delta",
            "0.2",
            "--epsilon",
            "1.0",
            "--seed",
            "5",
            "--time-budget",
            "0.5",
        ])
        .arg("--out")
        .arg(&out)
        .env("PRISTE_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("released/run_001.csv").exists());
    assert!(!out.join("released/run_002.csv").exists());

    let bad = Command::new(env!("CARGO_BIN_EXE_priste"))
        .args(["--mode", "quantify", "--out"])
        .arg(dir.path().join("bad"))
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(2));
}
