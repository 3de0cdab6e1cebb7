//! Meter plans, AC/DC measurement functions with analytic Jacobians, and
//! noisy measurement generation.
//!
//! Flow meters read at the first bus named in their location, positive out of
//! that bus into the branch. Injections are net power leaving the network at
//! the bus (generation minus load).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{AdmittanceMatrix, NetworkCase};
use crate::partition::ZoneId;
use crate::state::{Component, Mode, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error("meter {index} ({meter}) does not match the network: {reason}")]
    PlanMismatch { index: usize, meter: String, reason: String },
    #[error("state has {got} entries, expected {expected}")]
    StateLength { got: usize, expected: usize },
    #[error("invalid meter plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterKind {
    PInject,
    QInject,
    PFlow,
    QFlow,
}

impl MeterKind {
    pub fn is_injection(self) -> bool {
        matches!(self, MeterKind::PInject | MeterKind::QInject)
    }

    pub fn is_reactive(self) -> bool {
        matches!(self, MeterKind::QInject | MeterKind::QFlow)
    }
}

/// Where a meter sits: a bus (`M_n`) or a directed branch end (`M_{n1-n2}`,
/// read at `n1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeterSymbol {
    Injection(u32),
    Flow(u32, u32),
}

impl fmt::Display for MeterSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeterSymbol::Injection(b) => write!(f, "M_{b}"),
            MeterSymbol::Flow(a, b) => write!(f, "M_{{{a}-{b}}}"),
        }
    }
}

impl FromStr for MeterSymbol {
    type Err = String;

    /// Accepts `M_4`, `M4`, `4`, `M_{4-5}`, `M4-5` and `4-5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let t = t.strip_prefix('M').unwrap_or(t);
        let t = t.strip_prefix('_').unwrap_or(t);
        let t = t.trim_start_matches('{').trim_end_matches('}');
        let bad = || format!("invalid meter symbol `{s}`");
        match t.split_once('-') {
            Some((a, b)) => Ok(MeterSymbol::Flow(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
            None => Ok(MeterSymbol::Injection(t.parse().map_err(|_| bad())?)),
        }
    }
}

impl Serialize for MeterSymbol {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeterSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Meter {
    pub kind: MeterKind,
    pub location: MeterSymbol,
    pub zone: ZoneId,
    pub boundary: bool,
}

impl fmt::Display for Meter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            MeterKind::PInject | MeterKind::PFlow => "P",
            MeterKind::QInject | MeterKind::QFlow => "Q",
        };
        write!(f, "{k} {}", self.location)
    }
}

#[derive(Serialize, Deserialize)]
struct MeterJson {
    kind: MeterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<u32>,
    zone: ZoneId,
    #[serde(default)]
    boundary: bool,
}

impl Serialize for Meter {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (bus, from, to) = match self.location {
            MeterSymbol::Injection(b) => (Some(b), None, None),
            MeterSymbol::Flow(a, b) => (None, Some(a), Some(b)),
        };
        MeterJson { kind: self.kind, bus, from, to, zone: self.zone, boundary: self.boundary }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Meter {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = MeterJson::deserialize(deserializer)?;
        let location = if raw.kind.is_injection() {
            MeterSymbol::Injection(raw.bus.ok_or_else(|| D::Error::missing_field("bus"))?)
        } else {
            MeterSymbol::Flow(
                raw.from.ok_or_else(|| D::Error::missing_field("from"))?,
                raw.to.ok_or_else(|| D::Error::missing_field("to"))?,
            )
        };
        Ok(Meter { kind: raw.kind, location, zone: raw.zone, boundary: raw.boundary })
    }
}

/// Ordered meters, grouped contiguously by zone (ascending zone id).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    meters: Vec<Meter>,
    zone_ranges: BTreeMap<ZoneId, Range<usize>>,
}

impl MeasurementPlan {
    /// Meters are stably regrouped by zone; order within a zone is kept.
    pub fn new(mut meters: Vec<Meter>) -> Result<Self, MeasurementError> {
        for (k, m) in meters.iter().enumerate() {
            let kind_ok = match m.location {
                MeterSymbol::Injection(_) => m.kind.is_injection(),
                MeterSymbol::Flow(a, b) => !m.kind.is_injection() && a != b,
            };
            if !kind_ok {
                return Err(MeasurementError::InvalidPlan(format!("meter {k} ({m}) has a kind that does not match its location")));
            }
        }
        meters.sort_by_key(|m| m.zone);
        let mut zone_ranges = BTreeMap::new();
        let mut start = 0;
        for k in 1..=meters.len() {
            if k == meters.len() || meters[k].zone != meters[start].zone {
                zone_ranges.insert(meters[start].zone, start..k);
                start = k;
            }
        }
        Ok(Self { meters, zone_ranges })
    }

    pub fn from_json(text: &str) -> Result<Self, MeasurementError> {
        let meters: Vec<Meter> =
            serde_json::from_str(text).map_err(|e| MeasurementError::InvalidPlan(e.to_string()))?;
        Self::new(meters)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.meters).expect("meters serialize")
    }

    pub fn meters(&self) -> &[Meter] {
        &self.meters
    }

    pub fn len(&self) -> usize {
        self.meters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meters.is_empty()
    }

    /// Index range of a zone's meters (empty if the zone has none).
    pub fn zone_range(&self, zone: ZoneId) -> Range<usize> {
        self.zone_ranges.get(&zone).cloned().unwrap_or(0..0)
    }

    pub fn zone_ranges(&self) -> &BTreeMap<ZoneId, Range<usize>> {
        &self.zone_ranges
    }

    /// Plan with only the active-power meters, as used by the DC model.
    pub fn active_power_only(&self) -> Self {
        Self::new(self.meters.iter().filter(|m| !m.kind.is_reactive()).copied().collect())
            .expect("subset of a valid plan")
    }

    /// Indices of all readings taken by a meter symbol.
    pub fn indices_of(&self, symbol: MeterSymbol) -> Vec<usize> {
        (0..self.meters.len()).filter(|&k| self.meters[k].location == symbol).collect()
    }
}

/// Default meter plan for the IEEE 14-bus partition: every
/// symbol yields an active and a reactive reading, 46 readings in total.
pub fn default_meter_plan_14bus() -> MeasurementPlan {
    use MeterSymbol::{Flow, Injection};
    // (zone, internal symbols, boundary symbols)
    let table: [(ZoneId, Vec<MeterSymbol>, Vec<MeterSymbol>); 4] = [
        (1, vec![Injection(1), Flow(1, 2), Flow(1, 5), Flow(2, 5)], vec![]),
        (2, vec![Injection(3), Flow(3, 4), Flow(4, 7), Flow(7, 8)], vec![Flow(4, 5), Flow(4, 9), Flow(7, 9)]),
        (
            3,
            vec![Injection(12), Flow(6, 11), Flow(6, 12), Flow(6, 13), Flow(12, 13)],
            vec![Injection(13), Flow(13, 14)],
        ),
        (4, vec![Flow(9, 10), Flow(9, 14)], vec![Injection(10), Injection(14), Flow(10, 11)]),
    ];
    let mut meters = Vec::with_capacity(46);
    for (zone, internal, boundary) in &table {
        let tagged = internal.iter().map(|s| (*s, false)).chain(boundary.iter().map(|s| (*s, true)));
        for (symbol, is_boundary) in tagged {
            let kinds = match symbol {
                Injection(_) => [MeterKind::PInject, MeterKind::QInject],
                Flow(..) => [MeterKind::PFlow, MeterKind::QFlow],
            };
            for kind in kinds {
                meters.push(Meter { kind, location: symbol, zone: *zone, boundary: is_boundary });
            }
        }
    }
    MeasurementPlan::new(meters).expect("default plan is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Clean,
    Noisy,
    Attacked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

/// Additive i.i.d. Gaussian meter noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { mean: 0.0, variance: 1e-4, seed: 0 }
    }
}

impl NoiseModel {
    /// Seeded generator for this model's noise stream.
    pub fn stream(&self) -> rand_chacha::ChaCha8Rng {
        crate::rng::SeedStreams::new(self.seed).stream(crate::rng::NOISE_STREAM)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Equation {
    Inject { bus: usize },
    /// Flow read at bus `at`; `y_self`/`y_mut` are the two-port entries of the
    /// metered end, `dc_b` is `1/x`.
    Flow { at: usize, other: usize, y_self: Complex64, y_mut: Complex64, dc_b: f64 },
}

/// A meter plan compiled against a network for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    mode: Mode,
    n_bus: usize,
    kinds: Vec<MeterKind>,
    equations: Vec<Equation>,
    /// Non-zero Y-bus entries per row, diagonal included.
    ybus_rows: Vec<Vec<(usize, Complex64)>>,
    /// `(neighbor, 1/x)` per bus over in-service branches.
    dc_rows: Vec<Vec<(usize, f64)>>,
}

impl MeasurementModel {
    pub fn new(case: &NetworkCase, ybus: &AdmittanceMatrix, plan: &MeasurementPlan, mode: Mode) -> Result<Self, MeasurementError> {
        let n = case.n_bus();
        let ybus_rows = (0..n)
            .map(|i| (0..n).filter_map(|j| {
                let y = ybus.y[(i, j)];
                (y.norm() != 0.0 || i == j).then_some((j, y))
            }).collect())
            .collect();
        let mut dc_rows = vec![Vec::new(); n];
        for br in case.branches().iter().filter(|b| b.in_service()) {
            let f = case.bus_index(br.from_bus).expect("validated");
            let t = case.bus_index(br.to_bus).expect("validated");
            dc_rows[f].push((t, 1.0 / br.x));
            dc_rows[t].push((f, 1.0 / br.x));
        }
        let mut equations = Vec::with_capacity(plan.len());
        for (index, meter) in plan.meters().iter().enumerate() {
            let mismatch = |reason: String| MeasurementError::PlanMismatch { index, meter: meter.to_string(), reason };
            if mode == Mode::Dc && meter.kind.is_reactive() {
                return Err(mismatch("reactive meters are not available in DC mode".into()));
            }
            let eq = match meter.location {
                MeterSymbol::Injection(bus) => Equation::Inject {
                    bus: case.bus_index(bus).ok_or_else(|| mismatch(format!("unknown bus {bus}")))?,
                },
                MeterSymbol::Flow(a, b) => {
                    let (k, forward) = case
                        .find_branch(a, b)
                        .ok_or_else(|| mismatch(format!("no in-service branch {a}-{b}")))?;
                    let adm = ybus.branches[k].expect("in-service branch has admittance");
                    let dc_b = 1.0 / case.branches()[k].x;
                    if forward {
                        Equation::Flow { at: adm.from, other: adm.to, y_self: adm.yff, y_mut: adm.yft, dc_b }
                    } else {
                        Equation::Flow { at: adm.to, other: adm.from, y_self: adm.ytt, y_mut: adm.ytf, dc_b }
                    }
                }
            };
            equations.push(eq);
        }
        Ok(Self { mode, n_bus: n, kinds: plan.meters().iter().map(|m| m.kind).collect(), equations, ybus_rows, dc_rows })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_bus(&self) -> usize {
        self.n_bus
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    /// Columns of the Jacobian: `2 n_bus` in AC, `n_bus` in DC.
    pub fn state_len(&self) -> usize {
        match self.mode {
            Mode::Ac => 2 * self.n_bus,
            Mode::Dc => self.n_bus,
        }
    }

    /// Canonical bus indices that meter `k` depends on.
    pub fn dependencies(&self, k: usize) -> Vec<usize> {
        match self.equations[k] {
            Equation::Inject { bus } => match self.mode {
                Mode::Ac => self.ybus_rows[bus].iter().map(|(j, _)| *j).collect(),
                Mode::Dc => std::iter::once(bus).chain(self.dc_rows[bus].iter().map(|(j, _)| *j)).collect(),
            },
            Equation::Flow { at, other, .. } => vec![at, other],
        }
    }

    /// Value of meter `k` with bus voltages supplied by `volt(bus) -> (vm, va)`.
    pub fn meter_value(&self, k: usize, volt: &impl Fn(usize) -> (f64, f64)) -> f64 {
        let kind = self.kinds[k];
        match (self.mode, self.equations[k]) {
            (Mode::Ac, Equation::Inject { bus }) => {
                let (vi, ti) = volt(bus);
                let mut acc = 0.0;
                for &(j, y) in &self.ybus_rows[bus] {
                    let (vj, tj) = volt(j);
                    let (s, c) = (ti - tj).sin_cos();
                    acc += vj * match kind {
                        MeterKind::PInject => y.re * c + y.im * s,
                        _ => y.re * s - y.im * c,
                    };
                }
                vi * acc
            }
            (Mode::Ac, Equation::Flow { at, other, y_self, y_mut, .. }) => {
                let (vk, tk) = volt(at);
                let (vm, tm) = volt(other);
                let (s, c) = (tk - tm).sin_cos();
                match kind {
                    MeterKind::PFlow => vk * vk * y_self.re + vk * vm * (y_mut.re * c + y_mut.im * s),
                    _ => -vk * vk * y_self.im + vk * vm * (y_mut.re * s - y_mut.im * c),
                }
            }
            (Mode::Dc, Equation::Inject { bus }) => {
                let ti = volt(bus).1;
                self.dc_rows[bus].iter().map(|&(j, b)| b * (ti - volt(j).1)).sum()
            }
            (Mode::Dc, Equation::Flow { at, other, dc_b, .. }) => dc_b * (volt(at).1 - volt(other).1),
        }
    }

    /// Partial derivatives of meter `k`, reported as `emit(bus, component, value)`.
    pub fn meter_gradient(&self, k: usize, volt: &impl Fn(usize) -> (f64, f64), emit: &mut impl FnMut(usize, Component, f64)) {
        let kind = self.kinds[k];
        match (self.mode, self.equations[k]) {
            (Mode::Ac, Equation::Inject { bus: i }) => {
                let (vi, ti) = volt(i);
                let mut d_vi = 0.0;
                let mut d_ti = 0.0;
                for &(j, y) in &self.ybus_rows[i] {
                    let (vj, tj) = volt(j);
                    let (s, c) = (ti - tj).sin_cos();
                    // term = vi vj f(θij); f and its θ-derivative
                    let (f, df) = match kind {
                        MeterKind::PInject => (y.re * c + y.im * s, -y.re * s + y.im * c),
                        _ => (y.re * s - y.im * c, y.re * c + y.im * s),
                    };
                    if j == i {
                        // vi² G (or -vi² B): angle independent
                        d_vi += 2.0 * vi * f;
                    } else {
                        d_vi += vj * f;
                        d_ti += vi * vj * df;
                        emit(j, Component::Vm, vi * f);
                        emit(j, Component::Va, -vi * vj * df);
                    }
                }
                emit(i, Component::Vm, d_vi);
                emit(i, Component::Va, d_ti);
            }
            (Mode::Ac, Equation::Flow { at, other, y_self, y_mut, .. }) => {
                let (vk, tk) = volt(at);
                let (vm, tm) = volt(other);
                let (s, c) = (tk - tm).sin_cos();
                let (g, b) = (y_mut.re, y_mut.im);
                let (f, df, self_term) = match kind {
                    MeterKind::PFlow => (g * c + b * s, -g * s + b * c, 2.0 * vk * y_self.re),
                    _ => (g * s - b * c, g * c + b * s, -2.0 * vk * y_self.im),
                };
                emit(at, Component::Vm, self_term + vm * f);
                emit(other, Component::Vm, vk * f);
                emit(at, Component::Va, vk * vm * df);
                emit(other, Component::Va, -vk * vm * df);
            }
            (Mode::Dc, Equation::Inject { bus }) => {
                let mut total = 0.0;
                for &(j, b) in &self.dc_rows[bus] {
                    total += b;
                    emit(j, Component::Va, -b);
                }
                emit(bus, Component::Va, total);
            }
            (Mode::Dc, Equation::Flow { at, other, dc_b, .. }) => {
                emit(at, Component::Va, dc_b);
                emit(other, Component::Va, -dc_b);
            }
        }
    }

    fn check_state(&self, state: &StateVector) -> Result<(), MeasurementError> {
        let got = match self.mode {
            Mode::Ac => {
                if state.vm.len() != state.va.len() {
                    return Err(MeasurementError::StateLength { got: state.vm.len() + state.va.len(), expected: 2 * self.n_bus });
                }
                state.vm.len() + state.va.len()
            }
            Mode::Dc => state.va.len(),
        };
        if got != self.state_len() {
            return Err(MeasurementError::StateLength { got, expected: self.state_len() });
        }
        Ok(())
    }

    /// All meter values at a full network state.
    pub fn h(&self, state: &StateVector) -> Result<Vec<f64>, MeasurementError> {
        self.check_state(state)?;
        let volt = |b: usize| (state.vm_or_unit(b), state.va[b]);
        Ok((0..self.len()).map(|k| self.meter_value(k, &volt)).collect())
    }

    /// Dense Jacobian in the state flat layout. The slack angle column is
    /// always present; estimators handle the reference.
    pub fn jacobian(&self, state: &StateVector) -> Result<DMatrix<f64>, MeasurementError> {
        self.check_state(state)?;
        let n = self.n_bus;
        let volt = |b: usize| (state.vm_or_unit(b), state.va[b]);
        let mut jac = DMatrix::zeros(self.len(), self.state_len());
        for k in 0..self.len() {
            self.meter_gradient(k, &volt, &mut |bus, comp, v| {
                if let Some(col) = crate::partition::slot_of(bus, n, comp, self.mode) {
                    jac[(k, col)] += v;
                }
            });
        }
        Ok(jac)
    }
}

/// AC measurement function `h(x)` for a plan.
pub fn h_eval(case: &NetworkCase, ybus: &AdmittanceMatrix, state: &StateVector, plan: &MeasurementPlan) -> Result<MeasurementVector, MeasurementError> {
    let model = MeasurementModel::new(case, ybus, plan, Mode::Ac)?;
    Ok(MeasurementVector { values: model.h(state)?, provenance: Provenance::Clean })
}

/// AC Jacobian `∂h/∂x`, `plan.len() × 2 n_bus`.
pub fn jacobian(case: &NetworkCase, ybus: &AdmittanceMatrix, state: &StateVector, plan: &MeasurementPlan) -> Result<DMatrix<f64>, MeasurementError> {
    MeasurementModel::new(case, ybus, plan, Mode::Ac)?.jacobian(state)
}

/// DC measurement function on an angles-only state.
pub fn dc_eval(case: &NetworkCase, state: &StateVector, plan: &MeasurementPlan) -> Result<MeasurementVector, MeasurementError> {
    let ybus = crate::case::build_ybus(case);
    let model = MeasurementModel::new(case, &ybus, plan, Mode::Dc)?;
    Ok(MeasurementVector { values: model.h(&state.in_mode(Mode::Dc))?, provenance: Provenance::Clean })
}

/// Constant DC Jacobian, `plan.len() × n_bus`.
pub fn dc_jacobian(case: &NetworkCase, plan: &MeasurementPlan) -> Result<DMatrix<f64>, MeasurementError> {
    let ybus = crate::case::build_ybus(case);
    let model = MeasurementModel::new(case, &ybus, plan, Mode::Dc)?;
    model.jacobian(&StateVector::flat_start(case.n_bus(), Mode::Dc))
}

/// `y = h(x_true) + w` with `w ~ N(mean, variance)` drawn from `rng`.
pub fn generate_measurements(
    model: &MeasurementModel,
    true_state: &StateVector,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<MeasurementVector, MeasurementError> {
    let mut values = model.h(&true_state.in_mode(model.mode()))?;
    if noise.variance <= 0.0 && noise.mean == 0.0 {
        return Ok(MeasurementVector { values, provenance: Provenance::Clean });
    }
    let normal = Normal::new(noise.mean, noise.variance.max(0.0).sqrt())
        .map_err(|e| MeasurementError::InvalidPlan(format!("bad noise model: {e}")))?;
    for v in &mut values {
        *v += normal.sample(rng);
    }
    Ok(MeasurementVector { values, provenance: Provenance::Noisy })
}
