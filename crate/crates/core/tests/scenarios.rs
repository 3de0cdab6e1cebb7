use std::process::Command;

use gridse::scenario::{emit_plot_data, run_repeated, run_scenario, AttackSpec, ScenarioConfig, ScenarioError, ScenarioKind};
use gridse::state::Mode;

const PRESETS: [ScenarioKind; 4] = [ScenarioKind::Normal, ScenarioKind::Ag1Avail, ScenarioKind::Ag1Full, ScenarioKind::Ag2];

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn presets_are_byte_reproducible() {
    for kind in PRESETS {
        let config = ScenarioConfig { seed: 5, ..ScenarioConfig::preset(kind) };
        let a = run_scenario(&config).unwrap();
        let b = run_scenario(&config).unwrap();
        assert_eq!(a.deterministic_json(), b.deterministic_json(), "{kind:?}");
        assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    for kind in PRESETS {
        let one = run_scenario(&ScenarioConfig { seed: 2, workers: 1, ..ScenarioConfig::preset(kind) }).unwrap();
        let four = run_scenario(&ScenarioConfig { seed: 2, workers: 4, ..ScenarioConfig::preset(kind) }).unwrap();
        let mut four_json = four.clone();
        four_json.config.workers = 1;
        assert_eq!(one.deterministic_json(), four_json.deterministic_json(), "{kind:?}");
        let (d1, d4) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_plot_data(&one, d1.path()).unwrap();
        emit_plot_data(&four, d4.path()).unwrap();
        let strip = |files: Vec<(String, Vec<u8>)>| files.into_iter().filter(|(n, _)| n.ends_with(".csv")).collect::<Vec<_>>();
        assert_eq!(strip(read_all(d1.path())), strip(read_all(d4.path())));
    }
}

#[test]
fn plot_files_have_expected_rows() {
    let report = run_scenario(&ScenarioConfig::preset(ScenarioKind::Ag2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plot_data(&report, dir.path()).unwrap();
    let rows = |p: &std::path::Path| csv::Reader::from_path(p).unwrap().records().count();
    let iterations = report.adse.iterations;
    assert_eq!(rows(&files.errors_by_iteration), iterations * 5);
    assert_eq!(rows(&files.estimates), 28);
    assert_eq!(rows(&files.zone_errors), 6);
    assert_eq!(rows(&files.adse_trace), report.trace.len());
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&files.report).unwrap()).unwrap();
    assert_eq!(json["adse"]["iterations"].as_u64(), Some(iterations as u64));
    assert_eq!(json["trace_files"].as_array().unwrap().len(), 4);
}

#[test]
fn custom_random_attack_from_json() {
    let spec = AttackSpec::from_json(r#"{"goal": "ag2", "mu": 4, "zone": 2, "bus": 4, "alpha": -0.1}"#).unwrap();
    let config = ScenarioConfig { scenario: ScenarioKind::Custom, attack: Some(spec), seed: 9, ..ScenarioConfig::default() };
    let a = run_scenario(&config).unwrap();
    let summary = a.attack.as_ref().unwrap();
    assert_eq!(summary.compromised_indices.len(), 4);
    let range = gridse::measurement::default_meter_plan_14bus().zone_range(2);
    assert!(summary.compromised_indices.iter().all(|i| range.contains(i)));
    assert_eq!(a.deterministic_json(), run_scenario(&config).unwrap().deterministic_json());
}

#[test]
fn dc_mode_runs() {
    let report = run_scenario(&ScenarioConfig { mode: Mode::Dc, max_iterations: 1000, consensus_tol: 1e-11, ..ScenarioConfig::default() }).unwrap();
    assert!(report.adse.converged && report.adse.l2_vs_wls_percent < 1e-5);
}

#[test]
fn repeated_runs_average() {
    let (reports, summary) = run_repeated(&ScenarioConfig::default(), 3).unwrap();
    assert_eq!(summary.seeds, vec![0, 1, 2]);
    let mean = reports.iter().map(|r| r.errors.global.e_l2_percent).sum::<f64>() / 3.0;
    assert!((summary.adse_global_mean - mean).abs() < 1e-12);
    assert!(matches!(run_repeated(&ScenarioConfig::default(), 0), Err(ScenarioError::Config(_))));
}

#[test]
fn config_errors_map_to_exit_code_two() {
    let bad = ScenarioConfig { noise_variance: -1.0, ..ScenarioConfig::default() };
    assert_eq!(run_scenario(&bad).unwrap_err().exit_code(), 2);
    let custom = ScenarioConfig { scenario: ScenarioKind::Custom, ..ScenarioConfig::default() };
    assert_eq!(run_scenario(&custom).unwrap_err().exit_code(), 2);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gridse")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let ok = cli(&["run", "--scenario", "ag1-full", "--seed", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("Z2"));
    assert_eq!(cli(&["run", "--scenario", "custom"]).status.code(), Some(2));
    assert_eq!(cli(&["run", "--case", "/nonexistent/case.m"]).status.code(), Some(2));
    assert_eq!(cli(&["run", "--rho", "-1"]).status.code(), Some(2));
    assert_ne!(cli(&["bogus"]).status.code(), Some(0));
}

#[test]
fn cli_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--scenario", "ag2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["errors_by_iteration.csv", "estimates.csv", "zone_errors.csv", "adse_trace.csv", "report.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}
