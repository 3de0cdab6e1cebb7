//! Estimation error metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{Partition, ZoneId};
use crate::state::{Component, StateVector};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference vector has zero norm")]
    ZeroNorm,
    #[error("bus index {0} missing from an estimate")]
    MissingBus(usize),
}

/// Which state components enter the l2 error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetricVariant {
    #[default]
    Full,
    VmOnly,
    VaOnly,
}

impl MetricVariant {
    fn includes(self, c: Component) -> bool {
        matches!((self, c), (MetricVariant::Full, _) | (MetricVariant::VmOnly, Component::Vm) | (MetricVariant::VaOnly, Component::Va))
    }
}

/// `est − truth`, elementwise.
pub fn state_error(est: &[f64], truth: &[f64]) -> Result<Vec<f64>, MetricError> {
    if est.len() != truth.len() {
        return Err(MetricError::LengthMismatch(est.len(), truth.len()));
    }
    Ok(est.iter().zip(truth).map(|(e, t)| e - t).collect())
}

/// `100·‖est − truth‖₂ / ‖truth‖₂`.
pub fn l2_error(est: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    let err = state_error(est, truth)?;
    let norm = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(MetricError::ZeroNorm);
    }
    Ok(100.0 * err.iter().map(|e| e * e).sum::<f64>().sqrt() / norm)
}

/// Mean squared error, per unit squared.
pub fn mse(est: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    let err = state_error(est, truth)?;
    if err.is_empty() {
        return Ok(0.0);
    }
    Ok(err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64)
}

/// `|(x̂_υ − x̂_φ)_wls − (x̂_υ − x̂_φ)_adse|` for one component.
pub fn pairwise_deviation(adse: &StateVector, wls: &StateVector, upsilon: usize, phi: usize, component: Component) -> Result<f64, MetricError> {
    let get = |s: &StateVector, b: usize| s.get(b, component).ok_or(MetricError::MissingBus(b));
    let d_wls = get(wls, upsilon)? - get(wls, phi)?;
    let d_adse = get(adse, upsilon)? - get(adse, phi)?;
    Ok((d_wls - d_adse).abs())
}

/// Values of `state` at the given buses, magnitudes then angles.
fn gather(state: &StateVector, buses: &[usize], variant: MetricVariant) -> Vec<f64> {
    let mut out = Vec::new();
    for c in [Component::Vm, Component::Va] {
        if variant.includes(c) {
            out.extend(buses.iter().filter_map(|&b| state.get(b, c)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub e_l2_percent: f64,
    pub mse: f64,
    pub max_abs_error: f64,
}

impl ErrorSummary {
    pub fn compute(est: &[f64], truth: &[f64]) -> Result<Self, MetricError> {
        let err = state_error(est, truth)?;
        Ok(Self {
            e_l2_percent: l2_error(est, truth)?,
            mse: mse(est, truth)?,
            max_abs_error: err.iter().fold(0.0f64, |m, e| m.max(e.abs())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub variant: MetricVariant,
    /// Over each zone's owned buses.
    pub per_zone: BTreeMap<ZoneId, ErrorSummary>,
    pub global: ErrorSummary,
    /// e_l2 percent per iteration for each zone.
    pub per_zone_series: BTreeMap<ZoneId, Vec<f64>>,
    pub global_series: Vec<f64>,
}

impl ErrorReport {
    /// Summaries of `final_state` and e_l2 series over `trajectory`.
    pub fn build(
        partition: &Partition,
        truth: &StateVector,
        final_state: &StateVector,
        trajectory: &[StateVector],
        variant: MetricVariant,
    ) -> Result<Self, MetricError> {
        let all: Vec<usize> = (0..truth.n_bus()).collect();
        let truth_all = gather(truth, &all, variant);
        let mut per_zone = BTreeMap::new();
        let mut per_zone_series = BTreeMap::new();
        for zone in partition.zones() {
            let t = gather(truth, &zone.owned, variant);
            per_zone.insert(zone.id, ErrorSummary::compute(&gather(final_state, &zone.owned, variant), &t)?);
            let series = trajectory
                .iter()
                .map(|s| l2_error(&gather(s, &zone.owned, variant), &t))
                .collect::<Result<_, _>>()?;
            per_zone_series.insert(zone.id, series);
        }
        let global_series = trajectory.iter().map(|s| l2_error(&gather(s, &all, variant), &truth_all)).collect::<Result<_, _>>()?;
        Ok(Self {
            variant,
            per_zone,
            global: ErrorSummary::compute(&gather(final_state, &all, variant), &truth_all)?,
            per_zone_series,
            global_series,
        })
    }

    pub fn zone_error(&self, zone: ZoneId) -> Option<f64> {
        self.per_zone.get(&zone).map(|s| s.e_l2_percent)
    }
}

/// e_l2 of `est` against `truth` under `variant` over all buses.
pub fn global_l2(est: &StateVector, truth: &StateVector, variant: MetricVariant) -> Result<f64, MetricError> {
    let all: Vec<usize> = (0..truth.n_bus()).collect();
    l2_error(&gather(est, &all, variant), &gather(truth, &all, variant))
}
