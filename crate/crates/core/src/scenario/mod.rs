//! End-to-end scenario runner: ground truth, noisy readings, the WLS
//! benchmark, the (possibly attacked) distributed estimator and metrics.

mod output;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use output::{emit_plot_data, PlotFiles};

use crate::adse::{run_adse, AdmmConfig, AdseError, DistributedProblem, DseResult};
use crate::attacks::{
    orchestrate, AttackError, AttackGoal, AvailabilityAttack, DropEvent, DropModel, IndexSelection, IntegrityAttack,
    Orchestration, TwoStageAttack,
};
use crate::case::{build_ybus, ground_truth_state, ieee14, parse_case, CaseError, NetworkCase};
use crate::measurement::{
    default_meter_plan_14bus, generate_measurements, MeasurementError, MeasurementModel, MeasurementPlan, MeterSymbol, NoiseModel,
};
use crate::metrics::{global_l2, pairwise_deviation, ErrorReport, ErrorSummary, MetricError, MetricVariant};
use crate::partition::{ieee14_default_partition, partition_network, PartitionError, ZoneAssignment, ZoneId};
use crate::rng::{SeedStreams, NOISE_STREAM};
use crate::state::{Component, Mode, Reference, StateVector};
use crate::wls::{wls_estimate, EstimateResult, Weights, WlsConfig, WlsError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("case: {0}")]
    Case(#[from] CaseError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("measurement plan: {0}")]
    Measurement(#[from] MeasurementError),
    #[error("attack: {0}")]
    Attack(#[from] AttackError),
    #[error("WLS benchmark: {0}")]
    Wls(#[from] WlsError),
    #[error("distributed estimator: {0}")]
    Adse(#[from] AdseError),
    #[error("metrics: {0}")]
    Metric(#[from] MetricError),
}

impl ScenarioError {
    /// Process exit code: 2 for configuration problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Wls(WlsError::SingularGain { .. } | WlsError::NonConvergence(_)) => 3,
            ScenarioError::Adse(AdseError::SingularLocalGain { .. }) => 3,
            ScenarioError::Metric(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Normal,
    Ag1Avail,
    Ag1Full,
    Ag2,
    Custom,
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown scenario `{s}`"))
    }
}

/// JSON attack description, e.g.
/// `{"goal": "ag1-full", "links": [[1,2],[2,4]], "start_iteration": 2, "zone": 2, "bus": 4, "alpha": -0.15, "zeta": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub goal: AttackGoal,
    #[serde(default)]
    pub links: Vec<(ZoneId, ZoneId)>,
    #[serde(default = "default_start")]
    pub start_iteration: usize,
    /// Integrity start; defaults to `start_iteration`.
    #[serde(default)]
    pub integrity_start: Option<usize>,
    #[serde(default = "default_zone")]
    pub zone: ZoneId,
    #[serde(default = "default_bus")]
    pub bus: u32,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub b0: f64,
    #[serde(default = "one")]
    pub zeta: f64,
    #[serde(default = "one")]
    pub p_u: f64,
    #[serde(default = "one")]
    pub p_a: f64,
    #[serde(default)]
    pub drop_model: DropModel,
    /// Targeted meters; defaults to every meter at `bus`.
    #[serde(default)]
    pub meters: Option<Vec<MeterSymbol>>,
    /// Random selection of this many readings instead of targeted meters.
    #[serde(default)]
    pub mu: Option<usize>,
}

fn default_start() -> usize {
    2
}
fn default_zone() -> ZoneId {
    2
}
fn default_bus() -> u32 {
    4
}
fn default_alpha() -> f64 {
    -0.15
}
fn one() -> f64 {
    1.0
}

impl AttackSpec {
    /// Spec for a preset attack goal with the given strength and loss rate.
    pub fn preset(goal: AttackGoal, alpha: f64, zeta: f64) -> Self {
        Self {
            goal,
            links: match goal {
                AttackGoal::Ag2 => vec![],
                _ => vec![(1, 2), (2, 4)],
            },
            start_iteration: default_start(),
            integrity_start: None,
            zone: default_zone(),
            bus: default_bus(),
            alpha,
            b0: 1.0,
            zeta,
            p_u: 1.0,
            p_a: 1.0,
            drop_model: DropModel::BinaryDrop,
            meters: match IntegrityAttack::bus4_zone2(alpha).selection {
                IndexSelection::Targeted(m) => Some(m),
                IndexSelection::Random { .. } => None,
            },
            mu: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Config(format!("attack spec: {e}")))
    }

    /// Meters connected to `bus` in `plan`'s zone: its injection and every
    /// flow with `bus` at either end.
    fn meters_at_bus(&self, plan: &MeasurementPlan) -> Vec<MeterSymbol> {
        let mut symbols = vec![MeterSymbol::Injection(self.bus)];
        for m in &plan.meters()[plan.zone_range(self.zone)] {
            if let MeterSymbol::Flow(a, b) = m.location {
                if (a == self.bus || b == self.bus) && !symbols.contains(&m.location) {
                    symbols.push(m.location);
                }
            }
        }
        symbols
    }

    pub fn to_attack(&self, plan: &MeasurementPlan) -> TwoStageAttack {
        let availability = (!self.links.is_empty()).then(|| AvailabilityAttack {
            p_u: self.p_u,
            p_a: self.p_a,
            zeta: self.zeta,
            model: self.drop_model,
            ..AvailabilityAttack::certain(self.links.iter().copied(), self.start_iteration)
        });
        let integrity = (self.goal != AttackGoal::Ag1AvailabilityOnly).then(|| IntegrityAttack {
            zone: self.zone,
            bus: self.bus,
            alpha: self.alpha,
            b0: self.b0,
            selection: match self.mu {
                Some(mu) => IndexSelection::Random { mu },
                None => IndexSelection::Targeted(self.meters.clone().unwrap_or_else(|| self.meters_at_bus(plan))),
            },
            start_iteration: self.integrity_start.unwrap_or(self.start_iteration),
        });
        TwoStageAttack { goal: self.goal, availability, integrity }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// MATPOWER case file; the bundled IEEE 14-bus case when `None`.
    pub case_path: Option<PathBuf>,
    /// Zone assignment JSON (`{"bus id": zone}`); the 14-bus default when `None`.
    pub assignment_path: Option<PathBuf>,
    /// Meter plan JSON; the 14-bus default when `None`.
    pub plan_path: Option<PathBuf>,
    pub scenario: ScenarioKind,
    pub mode: Mode,
    pub seed: u64,
    pub rho: f64,
    pub max_iterations: usize,
    pub consensus_tol: f64,
    pub noise_mean: f64,
    pub noise_variance: f64,
    /// Attack strength for presets.
    pub alpha: f64,
    /// Loss probability for presets.
    pub zeta: f64,
    /// Required for `custom`; ignored by presets.
    pub attack: Option<AttackSpec>,
    pub metric_variant: MetricVariant,
    pub reference: Reference,
    pub workers: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let admm = AdmmConfig::default();
        Self {
            case_path: None,
            assignment_path: None,
            plan_path: None,
            scenario: ScenarioKind::Normal,
            mode: Mode::Ac,
            seed: 0,
            rho: admm.rho,
            max_iterations: admm.max_iterations,
            consensus_tol: admm.consensus_tol,
            noise_mean: 0.0,
            noise_variance: 1e-4,
            alpha: -0.15,
            zeta: 1.0,
            attack: None,
            metric_variant: MetricVariant::Full,
            reference: Reference::default(),
            workers: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn preset(scenario: ScenarioKind) -> Self {
        Self { scenario, ..Self::default() }
    }

    /// The attack this configuration runs, if any.
    pub fn attack_spec(&self) -> Result<Option<AttackSpec>, ScenarioError> {
        let goal = match self.scenario {
            ScenarioKind::Normal => return Ok(None),
            ScenarioKind::Custom => return Ok(self.attack.clone()),
            ScenarioKind::Ag1Avail => AttackGoal::Ag1AvailabilityOnly,
            ScenarioKind::Ag1Full => AttackGoal::Ag1Full,
            ScenarioKind::Ag2 => AttackGoal::Ag2,
        };
        Ok(Some(AttackSpec::preset(goal, self.alpha, self.zeta)))
    }

    pub fn admm(&self) -> AdmmConfig {
        AdmmConfig {
            rho: self.rho,
            max_iterations: self.max_iterations,
            consensus_tol: self.consensus_tol,
            workers: self.workers,
            reference: self.reference,
            ..AdmmConfig::default()
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.noise_variance >= 0.0) {
            return Err(ScenarioError::Config(format!("noise variance must be non-negative, got {}", self.noise_variance)));
        }
        if self.scenario == ScenarioKind::Custom && self.attack.is_none() {
            return Err(ScenarioError::Config("custom scenario needs an attack spec".into()));
        }
        Ok(())
    }
}

fn read(path: &PathBuf) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.clone(), source })
}

/// Case, partition and plan a configuration refers to.
#[derive(Debug, Clone)]
pub struct Setup {
    pub case: NetworkCase,
    pub assignment: ZoneAssignment,
    pub plan: MeasurementPlan,
}

impl Setup {
    pub fn load(config: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let case = match &config.case_path {
            Some(p) => parse_case(&read(p)?)?,
            None => ieee14(),
        };
        let assignment = match &config.assignment_path {
            Some(p) => ZoneAssignment::from_json(&read(p)?).map_err(|e| ScenarioError::Config(format!("zone assignment: {e}")))?,
            None => ieee14_default_partition(),
        };
        let mut plan = match &config.plan_path {
            Some(p) => MeasurementPlan::from_json(&read(p)?)?,
            None => default_meter_plan_14bus(),
        };
        if config.mode == Mode::Dc {
            plan = plan.active_power_only();
        }
        Ok(Self { case, assignment, plan })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlsSummary {
    pub converged: bool,
    pub iterations: usize,
    pub errors: ErrorSummary,
    pub state: StateVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdseSummary {
    pub iterations: usize,
    pub converged: bool,
    pub consensus_residual: Vec<f64>,
    pub state: StateVector,
    /// e_l2 of the ADSE estimate against the WLS estimate, percent.
    pub l2_vs_wls_percent: f64,
    /// `d_{2,3}` on angles.
    pub angle_deviation_2_3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub spec: AttackSpec,
    pub dropped: Vec<(usize, ZoneId, ZoneId)>,
    pub compromised_indices: Vec<usize>,
    pub skipped_meters: Vec<MeterSymbol>,
    pub attack_vector: Vec<f64>,
}

/// One row of the per-iteration estimator trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub zone: ZoneId,
    pub bus: u32,
    pub component: Component,
    pub estimate: f64,
    pub truth: f64,
    pub consensus_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub bus_ids: Vec<u32>,
    pub truth: StateVector,
    pub wls: WlsSummary,
    pub adse: AdseSummary,
    pub errors: ErrorReport,
    pub attack: Option<AttackSummary>,
    #[serde(default)]
    pub trace_files: Vec<String>,
    pub duration_ms: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl RunReport {
    /// JSON with the wall-clock duration zeroed, for reproducibility checks.
    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.duration_ms = 0.0;
        serde_json::to_string_pretty(&copy).expect("report serializes")
    }

    pub fn zone_error(&self, zone: ZoneId) -> f64 {
        self.errors.zone_error(zone).unwrap_or(f64::NAN)
    }
}

fn trace_rows(problem: &DistributedProblem, case: &NetworkCase, truth: &StateVector, result: &DseResult) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for (k, zone) in problem.partition().zones().iter().enumerate() {
        let labels = zone.slot_labels(problem.mode());
        for (i, x) in result.trajectories[k].estimates.iter().enumerate() {
            for (slot, &(bus, comp)) in labels.iter().enumerate() {
                rows.push(TraceRow {
                    iteration: i,
                    zone: zone.id,
                    bus: case.buses()[bus].id,
                    component: comp,
                    estimate: x[slot],
                    truth: truth.get(bus, comp).unwrap_or(f64::NAN),
                    consensus_residual: result.consensus_residual[i],
                });
            }
        }
    }
    rows.sort_by_key(|r| (r.iteration, r.zone));
    rows
}

/// Run one configured scenario end to end.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    let started = Instant::now();
    config.validate()?;
    let setup = Setup::load(config)?;
    let Setup { case, assignment, plan } = &setup;
    let mode = config.mode;
    let ybus = build_ybus(case);
    let partition = partition_network(case, assignment)?;
    let truth = ground_truth_state(case).in_mode(mode);
    let model = MeasurementModel::new(case, &ybus, plan, mode)?;
    let streams = SeedStreams::new(config.seed);
    let noise = NoiseModel { mean: config.noise_mean, variance: config.noise_variance, seed: config.seed };
    let y = generate_measurements(&model, &truth, &noise, &mut streams.stream(NOISE_STREAM))?;
    let weights = estimator_weights(config.noise_variance);

    let wls_config = WlsConfig { weights: weights.clone(), reference: config.reference, ..WlsConfig::default() };
    let wls: EstimateResult = wls_estimate(case, &model, &y, &wls_config)?;
    log::info!("WLS converged in {} iterations", wls.iterations_used);

    let problem = DistributedProblem::new(case, &ybus, &partition, plan, mode, &y, &weights)?;
    let spec = config.attack_spec()?;
    let mut orchestration = match &spec {
        Some(spec) => orchestrate(&spec.to_attack(plan), case, plan, &problem, &truth, &streams)?,
        None => Orchestration::clean(),
    };
    let readings = orchestration.readings.clone();
    let result = run_adse(&problem, &config.admm(), orchestration.channel(), &readings)?;
    log::info!("ADSE stopped after {} iterations (converged: {})", result.iterations, result.converged);

    let trajectory: Vec<StateVector> = (0..result.iterations).map(|i| result.global_at(&problem, i)).collect();
    let errors = ErrorReport::build(&partition, &truth, &result.global, &trajectory, config.metric_variant)?;
    let all: Vec<f64> = truth.to_flat();
    let wls_errors = ErrorSummary::compute(&wls.state.to_flat(), &all)?;
    let idx = |id: u32| case.bus_index(id);
    let angle_deviation_2_3 = match (idx(2), idx(3)) {
        (Some(a), Some(b)) => Some(pairwise_deviation(&result.global, &wls.state, a, b, Component::Va)?),
        _ => None,
    };
    let attack = spec.map(|spec| AttackSummary {
        spec,
        dropped: orchestration.drop_log().iter().map(|d: &DropEvent| (d.iteration, d.link.0, d.link.1)).collect(),
        compromised_indices: orchestration.integrity().map(|i| i.global_indices.clone()).unwrap_or_default(),
        skipped_meters: orchestration.integrity().map(|i| i.skipped_meters.clone()).unwrap_or_default(),
        attack_vector: orchestration.integrity().map(|i| i.a.clone()).unwrap_or_default(),
    });
    let trace = trace_rows(&problem, case, &truth, &result);
    Ok(RunReport {
        config: config.clone(),
        bus_ids: case.buses().iter().map(|b| b.id).collect(),
        adse: AdseSummary {
            iterations: result.iterations,
            converged: result.converged,
            l2_vs_wls_percent: global_l2(&result.global, &wls.state, config.metric_variant)?,
            consensus_residual: result.consensus_residual.clone(),
            state: result.global.clone(),
            angle_deviation_2_3,
        },
        wls: WlsSummary { converged: wls.converged, iterations: wls.iterations_used, errors: wls_errors, state: wls.state },
        truth,
        errors,
        attack,
        trace_files: Vec::new(),
        duration_ms: started.elapsed().as_secs_f64() * 1e3,
        trace,
    })
}

/// `1/σ²` weights; a noise-free run uses the nominal 1e-4 variance.
pub fn estimator_weights(variance: f64) -> Weights {
    Weights::from_variance(if variance > 0.0 { variance } else { 1e-4 })
}

/// Mean errors over repeated seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub wls_global_mean: f64,
    pub adse_global_mean: f64,
    pub adse_zone_mean: std::collections::BTreeMap<ZoneId, f64>,
}

/// Run `n` seeds starting at `config.seed` and average the error metrics.
pub fn run_repeated(config: &ScenarioConfig, n: usize) -> Result<(Vec<RunReport>, RepeatSummary), ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::Config("repeat count must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..n as u64).map(|i| config.seed + i).collect();
    let reports = seeds
        .iter()
        .map(|&seed| run_scenario(&ScenarioConfig { seed, ..config.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = |f: &dyn Fn(&RunReport) -> f64| reports.iter().map(f).sum::<f64>() / n as f64;
    let zones: Vec<ZoneId> = reports[0].errors.per_zone.keys().copied().collect();
    let summary = RepeatSummary {
        wls_global_mean: mean(&|r| r.wls.errors.e_l2_percent),
        adse_global_mean: mean(&|r| r.errors.global.e_l2_percent),
        adse_zone_mean: zones.iter().map(|&z| (z, mean(&|r| r.zone_error(z)))).collect(),
        seeds,
    };
    Ok((reports, summary))
}
