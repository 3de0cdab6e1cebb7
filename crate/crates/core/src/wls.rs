//! Centralized weighted least squares benchmark estimator.
//!
//! AC runs Gauss-Newton from a flat start; DC is a single normal-equations
//! solve. Reference quantities at the slack bus are removed from the unknowns.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::NetworkCase;
use crate::linalg::{inf_norm, l2_norm, solve_spd, weighted_gram, weighted_rhs};
use crate::measurement::{MeasurementError, MeasurementModel, MeasurementVector};
use crate::partition::slot_of;
use crate::state::{Mode, Reference, StateVector};

#[derive(Debug, Error)]
pub enum WlsError {
    #[error("gain matrix is singular at iteration {iteration}: the meter plan does not observe the state")]
    SingularGain { iteration: usize },
    #[error("no convergence within {} iterations", .0.iterations_used)]
    NonConvergence(Box<EstimateResult>),
    #[error("{got} weights for {expected} measurements")]
    WeightLength { got: usize, expected: usize },
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Diagonal of the weight matrix `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Weights {
    /// Same weight for every reading.
    Uniform(f64),
    PerMeasurement(Vec<f64>),
}

impl Weights {
    /// `1/σ²` for every reading.
    pub fn from_variance(variance: f64) -> Self {
        Weights::Uniform(1.0 / variance)
    }

    pub fn expand(&self, n: usize) -> Result<Vec<f64>, WlsError> {
        match self {
            Weights::Uniform(w) => Ok(vec![*w; n]),
            Weights::PerMeasurement(v) if v.len() == n => Ok(v.clone()),
            Weights::PerMeasurement(v) => Err(WlsError::WeightLength { got: v.len(), expected: n }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlsConfig {
    pub max_iterations: usize,
    /// Infinity-norm threshold on the state step.
    pub convergence_tol: f64,
    pub weights: Weights,
    #[serde(default)]
    pub reference: Reference,
}

impl Default for WlsConfig {
    fn default() -> Self {
        Self { max_iterations: 50, convergence_tol: 1e-6, weights: Weights::from_variance(1e-4), reference: Reference::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub step_norm: f64,
    /// `‖y − h(x)‖₂` before the step.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub state: StateVector,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_residual_norm: f64,
    pub per_iteration_trace: Vec<IterationRecord>,
}

/// WLS estimate from a flat start.
pub fn wls_estimate(case: &NetworkCase, model: &MeasurementModel, y: &MeasurementVector, config: &WlsConfig) -> Result<EstimateResult, WlsError> {
    let start = StateVector::flat_start(case.n_bus(), model.mode());
    wls_estimate_from(case, model, y, config, start)
}

/// Pinned slot indices and values in the flat layout for `reference`.
pub(crate) fn reference_slots(case: &NetworkCase, mode: Mode, reference: Reference) -> Vec<(usize, f64)> {
    let slack = case.slack_index();
    reference
        .components(mode)
        .iter()
        .map(|&c| {
            let slot = slot_of(slack, case.n_bus(), c, mode).expect("slot exists in mode");
            let value = match c {
                crate::state::Component::Vm => case.buses()[slack].vm,
                crate::state::Component::Va => 0.0,
            };
            (slot, value)
        })
        .collect()
}

/// WLS estimate from a given initial state (its reference slots are overwritten).
pub fn wls_estimate_from(
    case: &NetworkCase,
    model: &MeasurementModel,
    y: &MeasurementVector,
    config: &WlsConfig,
    initial: StateVector,
) -> Result<EstimateResult, WlsError> {
    let m = model.len();
    if y.values.len() != m {
        return Err(MeasurementError::StateLength { got: y.values.len(), expected: m }.into());
    }
    let d = config.weights.expand(m)?;
    let pinned = reference_slots(case, model.mode(), config.reference);
    let mut x = initial.in_mode(model.mode()).to_flat();
    for &(slot, v) in &pinned {
        x[slot] = v;
    }
    let free: Vec<usize> = (0..x.len()).filter(|k| pinned.iter().all(|p| p.0 != *k)).collect();
    let iterations = match model.mode() {
        Mode::Ac => config.max_iterations.max(1),
        Mode::Dc => 1,
    };
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 0..iterations {
        let state = StateVector::from_flat(model.mode(), &x);
        let h = model.h(&state)?;
        let r: Vec<f64> = y.values.iter().zip(&h).map(|(y, h)| y - h).collect();
        let jac = model.jacobian(&state)?.select_columns(&free);
        let gain = weighted_gram(&jac, &d);
        let rhs = weighted_rhs(&jac, &d, &r);
        let step: DVector<f64> = solve_spd(gain, &rhs).ok_or(WlsError::SingularGain { iteration })?;
        let mut full_step = vec![0.0; x.len()];
        for (r, &k) in free.iter().enumerate() {
            full_step[k] = step[r];
        }
        for (xi, dx) in x.iter_mut().zip(&full_step) {
            *xi += dx;
        }
        let step_norm = inf_norm(&full_step);
        trace.push(IterationRecord { iteration, step_norm, residual_norm: l2_norm(&r) });
        if model.mode() == Mode::Dc || step_norm <= config.convergence_tol {
            converged = true;
            break;
        }
    }
    let state = StateVector::from_flat(model.mode(), &x);
    let h = model.h(&state)?;
    let final_residual_norm = l2_norm(&y.values.iter().zip(&h).map(|(y, h)| y - h).collect::<Vec<_>>());
    let result = EstimateResult { state, iterations_used: trace.len(), converged, final_residual_norm, per_iteration_trace: trace };
    if converged {
        Ok(result)
    } else {
        Err(WlsError::NonConvergence(Box::new(result)))
    }
}
