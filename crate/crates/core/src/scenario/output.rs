//! CSV and JSON files for plotting a run.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{RunReport, ScenarioError};
use crate::state::Component;

/// Files written by [`emit_plot_data`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub errors_by_iteration: PathBuf,
    pub estimates: PathBuf,
    pub zone_errors: PathBuf,
    pub adse_trace: PathBuf,
    pub report: PathBuf,
}

impl PlotFiles {
    pub fn all(&self) -> [&Path; 5] {
        [&self.errors_by_iteration, &self.estimates, &self.zone_errors, &self.adse_trace, &self.report]
    }
}

#[derive(Serialize)]
struct ErrorRow<'a> {
    iteration: usize,
    series: &'a str,
    e_l2_percent: f64,
}

#[derive(Serialize)]
struct EstimateRow {
    bus: u32,
    component: &'static str,
    truth: f64,
    wls: f64,
    adse: f64,
}

#[derive(Serialize)]
struct ZoneRow {
    series: String,
    e_l2_percent: f64,
    mse: f64,
    max_abs_error: f64,
}

#[derive(Serialize)]
struct TraceCsvRow {
    iteration: usize,
    zone: usize,
    slot: String,
    estimate: f64,
    truth: f64,
    consensus_residual: f64,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io { path: path.to_path_buf(), source }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ScenarioError::Io { path: path.to_path_buf(), source: e.into() })?;
    for row in rows {
        w.serialize(row).map_err(|e| ScenarioError::Io { path: path.to_path_buf(), source: e.into() })?;
    }
    w.flush().map_err(io_err(path))
}

/// Write per-iteration error curves, final estimates, zone error bars, the
/// estimator trace and the JSON report into `out_dir`.
pub fn emit_plot_data(report: &RunReport, out_dir: &Path) -> Result<PlotFiles, ScenarioError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = PlotFiles {
        errors_by_iteration: out_dir.join("errors_by_iteration.csv"),
        estimates: out_dir.join("estimates.csv"),
        zone_errors: out_dir.join("zone_errors.csv"),
        adse_trace: out_dir.join("adse_trace.csv"),
        report: out_dir.join("report.json"),
    };

    let e = &report.errors;
    let zone_names: Vec<(String, &Vec<f64>)> = e.per_zone_series.iter().map(|(z, s)| (format!("Z{z}"), s)).collect();
    let mut rows = Vec::new();
    for i in 0..e.global_series.len() {
        for (name, series) in &zone_names {
            rows.push(ErrorRow { iteration: i, series: name, e_l2_percent: series[i] });
        }
        rows.push(ErrorRow { iteration: i, series: "global", e_l2_percent: e.global_series[i] });
    }
    write_csv(&files.errors_by_iteration, rows)?;

    let mut est = Vec::new();
    for c in [Component::Vm, Component::Va] {
        for (b, &id) in report.bus_ids.iter().enumerate() {
            if let (Some(t), Some(w), Some(a)) = (report.truth.get(b, c), report.wls.state.get(b, c), report.adse.state.get(b, c)) {
                est.push(EstimateRow { bus: id, component: c.label(), truth: t, wls: w, adse: a });
            }
        }
    }
    write_csv(&files.estimates, est)?;

    let zone_rows = e
        .per_zone
        .iter()
        .map(|(z, s)| (format!("Z{z}"), s))
        .chain([("global".to_string(), &e.global), ("wls".to_string(), &report.wls.errors)])
        .map(|(series, s)| ZoneRow { series, e_l2_percent: s.e_l2_percent, mse: s.mse, max_abs_error: s.max_abs_error });
    write_csv(&files.zone_errors, zone_rows)?;

    write_csv(
        &files.adse_trace,
        report.trace.iter().map(|r| TraceCsvRow {
            iteration: r.iteration,
            zone: r.zone,
            slot: format!("{}:{}", r.bus, r.component.label()),
            estimate: r.estimate,
            truth: r.truth,
            consensus_residual: r.consensus_residual,
        }),
    )?;

    let mut with_files = report.clone();
    with_files.trace_files = files.all()[..4].iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect();
    let json = serde_json::to_string_pretty(&with_files).expect("report serializes");
    std::fs::write(&files.report, json).map_err(io_err(&files.report))?;
    Ok(files)
}
