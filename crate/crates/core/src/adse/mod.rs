//! ADMM-based distributed state estimation.
//!
//! Each zone keeps a local copy of its member buses plus the foreign buses at
//! the far end of its tie-lines. Every iteration:
//!
//! 1. each zone re-evaluates `h_κ`/`H_κ` at its iterate and solves
//!    `(H_κᵀD_κH_κ + ρC_κ) x = H_κᵀD_κ ỹ_κ + ρC_κ q_κ` (zones run in parallel);
//! 2. zones exchange shared-slot values over an [`ExchangeChannel`] and form
//!    `s_κ`, the average of the neighbor copies that arrived;
//! 3. `q_κ` and the multipliers `λ_κι` are updated.
//!
//! `C_κ` is diagonal over local state slots and holds the number of
//! neighbors sharing each slot, zero on internal slots. With `λ⁰ = 0`,
//! `q⁰ = s⁰ = x⁰` this is exact consensus ADMM for the pairwise constraints
//! `x_κ(ι) = x_κι = x_ι(κ)`, so on a linear model it converges to the
//! centralized WLS solution.

mod channel;
mod zone;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channel::{BoundaryMessage, Delivery, ExchangeChannel, PassThrough};
pub use zone::{local_update, multiplier_update, q_update, SingularLocalGain, SlotAverage, ZoneEstimatorState};

use crate::case::{AdmittanceMatrix, NetworkCase};
use crate::linalg::inf_norm;
use crate::measurement::{MeasurementError, MeasurementModel, MeasurementPlan, MeasurementVector};
use crate::partition::{shared_state_map, Partition, SharedBlock, SharedStateMap, ZoneId};
use crate::state::{Component, Mode, Reference, StateVector};
use crate::wls::{Weights, WlsError};

#[derive(Debug, Error)]
pub enum AdseError {
    #[error("zone {zone}: local gain matrix is singular at iteration {iteration}")]
    SingularLocalGain { zone: ZoneId, iteration: usize },
    #[error("zone {zone}: meter {meter} depends on bus index {bus} outside the zone's local state")]
    MeterOutsideZone { zone: ZoneId, meter: usize, bus: usize },
    #[error("meter {meter} belongs to zone {zone}, which is not in the partition")]
    UnknownZone { zone: ZoneId, meter: usize },
    #[error("invalid ADMM configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Weights(#[from] WlsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Linearization {
    /// One Gauss-Newton linearization of `h_κ` per outer iteration.
    #[default]
    PerIterationGaussNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iterations: usize,
    pub consensus_tol: f64,
    pub inner_linearization: Linearization,
    /// Worker threads for the zone updates; 0 or 1 runs them sequentially.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub reference: Reference,
    /// Starting global state; flat start when `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<StateVector>,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 10.0,
            max_iterations: 100,
            consensus_tol: 1e-6,
            inner_linearization: Linearization::PerIterationGaussNewton,
            workers: 1,
            reference: Reference::default(),
            warm_start: None,
        }
    }
}

impl AdmmConfig {
    fn validate(&self) -> Result<(), AdseError> {
        if !(self.rho > 0.0) {
            return Err(AdseError::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iterations == 0 {
            return Err(AdseError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.consensus_tol > 0.0) {
            return Err(AdseError::Config(format!("consensus_tol must be positive, got {}", self.consensus_tol)));
        }
        Ok(())
    }
}

/// Per-iteration measurement substitution, e.g. falsified readings.
pub trait MeasurementHook: Sync {
    /// Readings zone `zone` should use at `iteration`, or `None` for its own.
    fn zone_measurements(&self, zone: ZoneId, iteration: usize) -> Option<&[f64]>;
}

/// No substitution.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHooks;

impl MeasurementHook for NoHooks {
    fn zone_measurements(&self, _zone: ZoneId, _iteration: usize) -> Option<&[f64]> {
        None
    }
}

/// One zone's slice of the estimation problem.
#[derive(Debug, Clone)]
pub struct ZoneProblem {
    pub zone: ZoneId,
    /// Indices of this zone's meters in the global plan.
    pub meters: Vec<usize>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    /// Canonical bus index to local bus position.
    local_pos: Vec<Option<usize>>,
    pub n_local: usize,
}

/// A partitioned estimation problem ready for [`run_adse`].
///
/// Weights are rescaled to unit mean, so `ρ` is measured against an
/// average meter weight of one.
#[derive(Debug, Clone)]
pub struct DistributedProblem {
    mode: Mode,
    partition: Partition,
    shared: SharedStateMap,
    model: MeasurementModel,
    zones: Vec<ZoneProblem>,
    slack: usize,
    slack_vm: f64,
}

impl DistributedProblem {
    pub fn new(
        case: &NetworkCase,
        ybus: &AdmittanceMatrix,
        partition: &Partition,
        plan: &MeasurementPlan,
        mode: Mode,
        y: &MeasurementVector,
        weights: &Weights,
    ) -> Result<Self, AdseError> {
        let model = MeasurementModel::new(case, ybus, plan, mode)?;
        if y.values.len() != plan.len() {
            return Err(MeasurementError::StateLength { got: y.values.len(), expected: plan.len() }.into());
        }
        let mut all_weights = weights.expand(plan.len())?;
        // only ρ relative to D matters for the fixed point; unit-mean weights
        // make ρ dimensionless
        let mean = all_weights.iter().sum::<f64>() / all_weights.len().max(1) as f64;
        if mean > 0.0 {
            all_weights.iter_mut().for_each(|w| *w /= mean);
        }
        for (k, m) in plan.meters().iter().enumerate() {
            if partition.zone(m.zone).is_none() {
                return Err(AdseError::UnknownZone { zone: m.zone, meter: k });
            }
        }
        let mut zones = Vec::with_capacity(partition.n_zones());
        for zone in partition.zones() {
            let meters: Vec<usize> = plan.zone_range(zone.id).collect();
            let mut local_pos = vec![None; case.n_bus()];
            for (p, &b) in zone.local_buses.iter().enumerate() {
                local_pos[b] = Some(p);
            }
            for &k in &meters {
                if let Some(bus) = model.dependencies(k).into_iter().find(|&b| local_pos[b].is_none()) {
                    return Err(AdseError::MeterOutsideZone { zone: zone.id, meter: k, bus });
                }
            }
            zones.push(ZoneProblem {
                zone: zone.id,
                y: meters.iter().map(|&k| y.values[k]).collect(),
                weights: meters.iter().map(|&k| all_weights[k]).collect(),
                meters,
                local_pos,
                n_local: zone.n_local(),
            });
        }
        Ok(Self { mode, partition: partition.clone(), shared: shared_state_map(partition), model, zones, slack: case.slack_index(), slack_vm: case.buses()[case.slack_index()].vm })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn shared(&self) -> &SharedStateMap {
        &self.shared
    }

    pub fn zone_problems(&self) -> &[ZoneProblem] {
        &self.zones
    }

    pub fn zone_problem(&self, zone: ZoneId) -> Option<&ZoneProblem> {
        self.zones.iter().find(|z| z.zone == zone)
    }

    /// `h_κ` and `H_κ` at local state `x` of zone position `k`.
    pub fn zone_model(&self, k: usize, x: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let zp = &self.zones[k];
        let n = zp.n_local;
        let mode = self.mode;
        let volt = |bus: usize| {
            let p = zp.local_pos[bus].expect("dependency checked at construction");
            match mode {
                Mode::Ac => (x[p], x[n + p]),
                Mode::Dc => (1.0, x[p]),
            }
        };
        let mut h = Vec::with_capacity(zp.meters.len());
        let mut jac = DMatrix::zeros(zp.meters.len(), x.len());
        for (row, &k) in zp.meters.iter().enumerate() {
            h.push(self.model.meter_value(k, &volt));
            self.model.meter_gradient(k, &volt, &mut |bus, comp, v| {
                let p = zp.local_pos[bus].expect("dependency checked at construction");
                if let Some(col) = crate::partition::slot_of(p, n, comp, mode) {
                    jac[(row, col)] += v;
                }
            });
        }
        (h, jac)
    }

    /// Local slots of a shared block on its first zone, in payload order.
    fn block_slots(&self, zone_pos: usize, block: &SharedBlock) -> Vec<usize> {
        let n = self.zones[zone_pos].n_local;
        match self.mode {
            Mode::Ac => block.local_self.iter().copied().chain(block.local_self.iter().map(|p| n + p)).collect(),
            Mode::Dc => block.local_self.clone(),
        }
    }

    fn zone_pos(&self, zone: ZoneId) -> usize {
        self.zones.iter().position(|z| z.zone == zone).expect("zone in partition")
    }

    /// Position of `zone` in [`Self::zone_problems`].
    pub fn zone_index(&self, zone: ZoneId) -> Option<usize> {
        self.zones.iter().position(|z| z.zone == zone)
    }

    /// Restriction of a global state to zone position `k`'s local slots.
    pub fn local_state(&self, k: usize, state: &StateVector) -> Vec<f64> {
        let zone = &self.partition.zones()[k];
        let mut x = vec![0.0; zone.state_len(self.mode)];
        for &bus in &zone.local_buses {
            for c in [Component::Vm, Component::Va] {
                if let (Some(slot), Some(v)) = (zone.local_slot(bus, c, self.mode), state.get(bus, c)) {
                    x[slot] = v;
                }
            }
        }
        x
    }

    /// Initial per-zone states from `start` (flat start when `None`), with
    /// the reference quantities pinned in the slack bus's owning zone.
    pub fn initial_states(&self, reference: Reference, start: Option<&StateVector>) -> Vec<ZoneEstimatorState> {
        self.partition
            .zones()
            .iter()
            .enumerate()
            .map(|(k, zone)| {
                let zp = &self.zones[k];
                let len = zone.state_len(self.mode);
                let mut x0 = match start {
                    Some(state) => self.local_state(k, &state.in_mode(self.mode)),
                    None => vec![0.0; len],
                };
                if start.is_none() && self.mode == Mode::Ac {
                    x0[..zp.n_local].fill(1.0);
                }
                let mut pinned = vec![false; len];
                if zone.owns(self.slack) {
                    for &c in reference.components(self.mode) {
                        let slot = zone.local_slot(self.slack, c, self.mode).expect("slack is local");
                        pinned[slot] = true;
                        x0[slot] = if c == Component::Vm { self.slack_vm } else { 0.0 };
                    }
                }
                let share = self.shared.share_count_slots(zone.id, self.mode).into_iter().map(|c| c as f64).collect();
                let dims: BTreeMap<ZoneId, usize> = self
                    .partition
                    .neighbors(zone.id)
                    .iter()
                    .map(|&nb| (nb, self.block_slots(k, self.shared.block(zone.id, nb).expect("neighbor block")).len()))
                    .collect();
                ZoneEstimatorState::new(zone.id, x0, zp.weights.clone(), share, pinned, &dims)
            })
            .collect()
    }

    /// Global state from zone-owned slots.
    pub fn assemble(&self, local_states: &[&[f64]]) -> StateVector {
        let n_bus = self.partition.n_bus();
        let mut vm = vec![1.0; n_bus];
        let mut va = vec![0.0; n_bus];
        for (k, zone) in self.partition.zones().iter().enumerate() {
            let x = local_states[k];
            for &bus in &zone.owned {
                if let Some(s) = zone.local_slot(bus, Component::Vm, self.mode) {
                    vm[bus] = x[s];
                }
                va[bus] = x[zone.local_slot(bus, Component::Va, self.mode).expect("angle slot")];
            }
        }
        match self.mode {
            Mode::Ac => StateVector::new(vm, va),
            Mode::Dc => StateVector::angles_only(va),
        }
    }

    /// Largest disagreement between the two copies of any shared slot.
    pub fn consensus_residual(&self, states: &[ZoneEstimatorState]) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.partition.adjacency_pairs() {
            let (pa, pb) = (self.zone_pos(a), self.zone_pos(b));
            let block_a = self.shared.block(a, b).expect("block");
            let block_b = self.shared.block(b, a).expect("block");
            let sa = self.block_slots(pa, block_a);
            let sb = self.block_slots(pb, block_b);
            for (i, j) in sa.iter().zip(&sb) {
                worst = worst.max((states[pa].x[*i] - states[pb].x[*j]).abs());
            }
        }
        worst
    }
}

/// Shared-slot averages after one exchange, plus the neighbor payloads that
/// arrived (keyed by sender, in the receiver's block order).
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeOutcome {
    pub average: SlotAverage,
    pub received: BTreeMap<ZoneId, Vec<f64>>,
}

/// Send every zone's shared-slot values to its neighbors and average what
/// arrives. For each shared slot, `s` is the mean over the delivered
/// neighbor copies; slots with nothing delivered get `None` (the caller
/// retains `q`). Internal slots pass `x` through.
pub fn exchange_and_average(
    problem: &DistributedProblem,
    states: &[ZoneEstimatorState],
    channel: &mut dyn ExchangeChannel,
    iteration: usize,
) -> Vec<ExchangeOutcome> {
    let mut outcomes = Vec::with_capacity(states.len());
    for (k, zone) in problem.partition.zones().iter().enumerate() {
        let len = states[k].x.len();
        let mut sum = vec![0.0; len];
        let mut count = vec![0usize; len];
        let mut factor = vec![1.0f64; len];
        let mut received = BTreeMap::new();
        for &nb in problem.partition.neighbors(zone.id) {
            let pn = problem.zone_pos(nb);
            let outgoing = problem.block_slots(pn, problem.shared.block(nb, zone.id).expect("block"));
            let incoming = problem.block_slots(k, problem.shared.block(zone.id, nb).expect("block"));
            let message = BoundaryMessage {
                sender: nb,
                receiver: zone.id,
                iteration,
                payload: outgoing.iter().map(|&s| states[pn].x[s]).collect(),
            };
            let (payload, scale) = match channel.deliver(message) {
                Delivery::Delivered(p) => (p, 1.0),
                Delivery::Scaled { payload, factor } => (payload, factor),
                Delivery::Dropped => continue,
            };
            for (&slot, &v) in incoming.iter().zip(&payload) {
                sum[slot] += v;
                count[slot] += 1;
                factor[slot] = factor[slot].min(scale);
            }
            received.insert(nb, payload);
        }
        let s = (0..len)
            .map(|slot| {
                if states[k].is_shared(slot) {
                    (count[slot] > 0).then(|| sum[slot] / count[slot] as f64)
                } else {
                    Some(states[k].x[slot])
                }
            })
            .collect();
        outcomes.push(ExchangeOutcome { average: SlotAverage { s, factor }, received });
    }
    outcomes
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneTrajectory {
    pub zone: ZoneId,
    /// Local estimate after each iteration's local update.
    pub estimates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DseResult {
    pub mode: Mode,
    pub iterations: usize,
    pub converged: bool,
    pub trajectories: Vec<ZoneTrajectory>,
    /// Zone-owned slots of the final iterate.
    pub global: StateVector,
    pub consensus_residual: Vec<f64>,
    pub final_states: Vec<ZoneEstimatorState>,
}

impl DseResult {
    /// Assembled global estimate after iteration `i`.
    pub fn global_at(&self, problem: &DistributedProblem, i: usize) -> StateVector {
        let locals: Vec<&[f64]> = self.trajectories.iter().map(|t| t.estimates[i].as_slice()).collect();
        problem.assemble(&locals)
    }
}

/// Run the distributed estimator until consensus or `max_iterations`.
///
/// Zone updates are independent and may run on `config.workers` threads;
/// results do not depend on the worker count or on zone processing order.
pub fn run_adse(
    problem: &DistributedProblem,
    config: &AdmmConfig,
    channel: &mut dyn ExchangeChannel,
    hooks: &dyn MeasurementHook,
) -> Result<DseResult, AdseError> {
    config.validate()?;
    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| AdseError::Config(e.to_string()))?,
        )
    } else {
        None
    };

    let mut states = problem.initial_states(config.reference, config.warm_start.as_ref());
    let mut trajectories: Vec<ZoneTrajectory> =
        states.iter().map(|s| ZoneTrajectory { zone: s.zone_id, estimates: Vec::new() }).collect();
    let mut consensus = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 0..config.max_iterations {
        let solve = |(k, st): (usize, &ZoneEstimatorState)| -> Result<Vec<f64>, AdseError> {
            let zp = &problem.zones[k];
            let y = hooks.zone_measurements(zp.zone, iteration).unwrap_or(&zp.y);
            let (h, jac) = problem.zone_model(k, &st.x);
            local_update(st, y, &h, &jac, config.rho)
                .map_err(|_| AdseError::SingularLocalGain { zone: zp.zone, iteration })
        };
        let updates: Vec<Vec<f64>> = match &pool {
            Some(pool) => pool.install(|| states.par_iter().enumerate().map(solve).collect::<Result<_, _>>())?,
            None => states.iter().enumerate().map(solve).collect::<Result<_, _>>()?,
        };
        let mut step = 0.0f64;
        for (st, x_new) in states.iter_mut().zip(updates) {
            st.x_prev = std::mem::replace(&mut st.x, x_new);
            step = step.max(inf_norm(&st.x.iter().zip(&st.x_prev).map(|(a, b)| a - b).collect::<Vec<_>>()));
        }
        for (traj, st) in trajectories.iter_mut().zip(&states) {
            traj.estimates.push(st.x.clone());
        }

        let outcomes = exchange_and_average(problem, &states, channel, iteration);
        for (k, (st, outcome)) in states.iter_mut().zip(&outcomes).enumerate() {
            q_update(st, &outcome.average, iteration);
            let zone_id = st.zone_id;
            for (&nb, payload) in &outcome.received {
                let slots = problem.block_slots(k, problem.shared.block(zone_id, nb).expect("block"));
                let own: Vec<f64> = slots.iter().map(|&s| st.x[s]).collect();
                let lambda = st.lambda.get_mut(&nb).expect("multiplier per neighbor");
                multiplier_update(lambda, &own, payload, config.rho);
            }
        }

        let residual = problem.consensus_residual(&states);
        consensus.push(residual);
        iterations = iteration + 1;
        if residual <= config.consensus_tol && step <= config.consensus_tol {
            converged = true;
            break;
        }
    }

    let locals: Vec<&[f64]> = states.iter().map(|s| s.x.as_slice()).collect();
    let global = problem.assemble(&locals);
    Ok(DseResult {
        mode: problem.mode,
        iterations,
        converged,
        trajectories,
        global,
        consensus_residual: consensus,
        final_states: states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{build_ybus, ground_truth_state, ieee14};
    use crate::measurement::{default_meter_plan_14bus, Provenance};
    use crate::partition::{ieee14_default_partition, partition_network};

    fn dc_problem() -> (DistributedProblem, StateVector) {
        let case = ieee14();
        let ybus = build_ybus(&case);
        let partition = partition_network(&case, &ieee14_default_partition()).unwrap();
        let plan = default_meter_plan_14bus().active_power_only();
        let truth = ground_truth_state(&case).in_mode(Mode::Dc);
        let model = MeasurementModel::new(&case, &ybus, &plan, Mode::Dc).unwrap();
        let y = MeasurementVector { values: model.h(&truth).unwrap(), provenance: Provenance::Clean };
        let problem = DistributedProblem::new(&case, &ybus, &partition, &plan, Mode::Dc, &y, &Weights::Uniform(1.0)).unwrap();
        (problem, truth)
    }

    /// Drops every message.
    struct Blackout;
    impl ExchangeChannel for Blackout {
        fn deliver(&mut self, _message: BoundaryMessage) -> Delivery {
            Delivery::Dropped
        }
    }

    #[test]
    fn two_zone_average_is_neighbor_value() {
        let (problem, _) = dc_problem();
        let mut states = problem.initial_states(Reference::default(), None);
        for st in &mut states {
            for v in st.x.iter_mut() {
                *v = st.zone_id as f64;
            }
        }
        let out = exchange_and_average(&problem, &states, &mut PassThrough, 0);
        let z2 = problem.partition().zone(2).unwrap();
        // bus 8 (index 7) is internal to zone 2: s passes x through
        let slot8 = z2.local_slot(7, Component::Va, Mode::Dc).unwrap();
        assert_eq!(out[1].average.s[slot8], Some(2.0));
        // bus 3 (index 2) is shared with zone 1 only
        let slot3 = z2.local_slot(2, Component::Va, Mode::Dc).unwrap();
        assert_eq!(out[1].average.s[slot3], Some(1.0));
        // bus 4 (index 3) is shared with zones 1 and 4
        let slot4 = z2.local_slot(3, Component::Va, Mode::Dc).unwrap();
        assert_eq!(out[1].average.s[slot4], Some(2.5));
    }

    #[test]
    fn blackout_yields_isolated_local_solutions() {
        let (problem, _) = dc_problem();
        let config = AdmmConfig { max_iterations: 5, ..AdmmConfig::default() };
        let result = run_adse(&problem, &config, &mut Blackout, &NoHooks).unwrap();
        let init = problem.initial_states(Reference::default(), None);
        for (k, st) in result.final_states.iter().enumerate() {
            assert_eq!(st.q, init[k].q, "q frozen at its initial value");
            assert_eq!(st.last_update_iteration, None);
            // isolated solve against the frozen q, repeated: every iterate equal
            let first = &result.trajectories[k].estimates[0];
            for later in &result.trajectories[k].estimates {
                for (a, b) in first.iter().zip(later) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn dc_clean_matches_truth() {
        let (problem, truth) = dc_problem();
        let config = AdmmConfig { max_iterations: 2000, consensus_tol: 1e-11, ..AdmmConfig::default() };
        let result = run_adse(&problem, &config, &mut PassThrough, &NoHooks).unwrap();
        assert!(result.converged);
        for (a, b) in result.global.va.iter().zip(&truth.va) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let (problem, _) = dc_problem();
        let one = run_adse(&problem, &AdmmConfig { max_iterations: 20, ..AdmmConfig::default() }, &mut PassThrough, &NoHooks).unwrap();
        let four = run_adse(&problem, &AdmmConfig { max_iterations: 20, workers: 4, ..AdmmConfig::default() }, &mut PassThrough, &NoHooks).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn bad_config_is_rejected() {
        let (problem, _) = dc_problem();
        let config = AdmmConfig { rho: 0.0, ..AdmmConfig::default() };
        assert!(matches!(run_adse(&problem, &config, &mut PassThrough, &NoHooks), Err(AdseError::Config(_))));
    }
}
