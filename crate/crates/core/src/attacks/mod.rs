//! Two-stage adversary: link availability attack plus false data injection.
//!
//! The availability stage cuts selected zone links so the target zone keeps
//! a frozen auxiliary state. The integrity stage adds a stealthy vector
//! `a = H_κ b` to some of the zone's readings. Under AG1 both run and the
//! falsified zone is cut off; under AG2 links stay intact and the falsified
//! estimates spread through boundary consensus.

mod availability;
mod integrity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use availability::{delivery_probability, link, AttackedChannel, AvailabilityAttack, DropEvent, DropModel};
pub use integrity::{construct_attack, construct_attack_at, target_injection_vector, targeted_index_set, ConstructedAttack, TargetedIndices};

use crate::adse::{DistributedProblem, ExchangeChannel, MeasurementHook, PassThrough};
use crate::case::NetworkCase;
use crate::measurement::{MeasurementPlan, MeterSymbol};
use crate::partition::ZoneId;
use crate::rng::{SeedStreams, ATTACK_INDEX_STREAM, AVAILABILITY_STREAM};
use crate::state::StateVector;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("{0}")]
    Domain(String),
    #[error("none of the requested meters has a reading in zone {zone}")]
    EmptyTargetSet { zone: ZoneId },
    #[error("inconsistent attack: {0}")]
    Config(String),
}

/// How the compromised readings are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSelection {
    /// Every reading at the listed meters.
    Targeted(Vec<MeterSymbol>),
    /// `mu` distinct readings of the zone drawn at random.
    Random { mu: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrityAttack {
    pub zone: ZoneId,
    /// Bus whose magnitude the attack shifts.
    pub bus: u32,
    pub alpha: f64,
    /// Nominal magnitude scaling `α`, per unit.
    pub b0: f64,
    pub selection: IndexSelection,
    pub start_iteration: usize,
}

impl IntegrityAttack {
    /// The bus-4 attack on zone 2 with the meters at bus 4.
    pub fn bus4_zone2(alpha: f64) -> Self {
        let meters = [MeterSymbol::Injection(4), MeterSymbol::Flow(4, 5), MeterSymbol::Flow(4, 7), MeterSymbol::Flow(3, 4)];
        Self { zone: 2, bus: 4, alpha, b0: 1.0, selection: IndexSelection::Targeted(meters.to_vec()), start_iteration: 2 }
    }
}

/// Realized integrity attack for one zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreparedIntegrity {
    pub zone: ZoneId,
    pub start_iteration: usize,
    /// Compromised readings as global plan indices.
    pub global_indices: Vec<usize>,
    pub skipped_meters: Vec<MeterSymbol>,
    pub b: Vec<f64>,
    /// Attack vector over the zone's readings.
    pub a: Vec<f64>,
    pub y_false: Vec<f64>,
}

impl PreparedIntegrity {
    /// Builds the attack with `H_κ` evaluated once at `operating_point`.
    pub fn prepare(
        attack: &IntegrityAttack,
        case: &NetworkCase,
        plan: &MeasurementPlan,
        problem: &DistributedProblem,
        operating_point: &StateVector,
        streams: &SeedStreams,
    ) -> Result<Self, AttackError> {
        let k = problem
            .zone_index(attack.zone)
            .ok_or_else(|| AttackError::Config(format!("zone {} is not in the partition", attack.zone)))?;
        let zone = &problem.partition().zones()[k];
        let zp = &problem.zone_problems()[k];
        let b = target_injection_vector(case, zone, problem.mode(), attack.bus, attack.alpha, attack.b0)?;
        let (_, h) = problem.zone_model(k, &problem.local_state(k, operating_point));
        let offset = plan.zone_range(attack.zone).start;
        let (constructed, skipped_meters) = match &attack.selection {
            IndexSelection::Targeted(symbols) => {
                let t = targeted_index_set(plan, symbols, attack.zone)?;
                let local: Vec<usize> = t.indices.iter().map(|&g| g - offset).collect();
                (construct_attack_at(&local, &h, &zp.y, &b)?, t.skipped)
            }
            IndexSelection::Random { mu } => {
                let mut rng = streams.stream(ATTACK_INDEX_STREAM);
                (construct_attack(*mu, &h, &zp.y, &b, &mut rng)?, Vec::new())
            }
        };
        Ok(Self {
            zone: attack.zone,
            start_iteration: attack.start_iteration,
            global_indices: constructed.indices.iter().map(|&i| i + offset).collect(),
            skipped_meters,
            b,
            a: constructed.a,
            y_false: constructed.y_false,
        })
    }
}

/// Substitutes the falsified readings of one zone from a start iteration.
#[derive(Debug, Clone, Default)]
pub struct FalsifiedReadings {
    attack: Option<PreparedIntegrity>,
}

impl FalsifiedReadings {
    pub fn new(attack: Option<PreparedIntegrity>) -> Self {
        Self { attack }
    }
}

impl MeasurementHook for FalsifiedReadings {
    fn zone_measurements(&self, zone: ZoneId, iteration: usize) -> Option<&[f64]> {
        self.attack
            .as_ref()
            .filter(|a| a.zone == zone && iteration >= a.start_iteration)
            .map(|a| a.y_false.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackGoal {
    #[serde(rename = "ag1-avail")]
    Ag1AvailabilityOnly,
    #[serde(rename = "ag1-full")]
    Ag1Full,
    #[serde(rename = "ag2")]
    Ag2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageAttack {
    pub goal: AttackGoal,
    pub availability: Option<AvailabilityAttack>,
    pub integrity: Option<IntegrityAttack>,
}

impl TwoStageAttack {
    pub fn validate(&self) -> Result<(), AttackError> {
        let (a, i) = (self.availability.is_some(), self.integrity.is_some());
        match (self.goal, a, i) {
            (AttackGoal::Ag1AvailabilityOnly, true, false) | (AttackGoal::Ag1Full, true, true) | (AttackGoal::Ag2, false, true) => {}
            (AttackGoal::Ag1AvailabilityOnly, _, _) => {
                return Err(AttackError::Config("ag1-avail needs an availability stage and no integrity stage".into()))
            }
            (AttackGoal::Ag1Full, _, _) => return Err(AttackError::Config("ag1-full needs both stages".into())),
            (AttackGoal::Ag2, true, _) => {
                return Err(AttackError::Config("ag2 keeps every link intact; drop the availability stage".into()))
            }
            (AttackGoal::Ag2, false, false) => return Err(AttackError::Config("ag2 needs an integrity stage".into())),
        }
        if let Some(av) = &self.availability {
            av.validate()?;
        }
        Ok(())
    }
}

/// Channel and measurement hook that realize an attack for one run.
#[derive(Debug, Clone)]
pub struct Orchestration {
    channel: Option<AttackedChannel<PassThrough>>,
    pass: PassThrough,
    pub readings: FalsifiedReadings,
}

impl Orchestration {
    /// No attack.
    pub fn clean() -> Self {
        Self { channel: None, pass: PassThrough, readings: FalsifiedReadings::default() }
    }

    pub fn channel(&mut self) -> &mut dyn ExchangeChannel {
        match &mut self.channel {
            Some(c) => c,
            None => &mut self.pass,
        }
    }

    pub fn drop_log(&self) -> &[DropEvent] {
        self.channel.as_ref().map_or(&[], |c| c.drop_log())
    }

    pub fn integrity(&self) -> Option<&PreparedIntegrity> {
        self.readings.attack.as_ref()
    }
}

/// Build the attacked channel and falsified readings for `attack`.
///
/// The integrity vector uses `H_κ` at `operating_point` (the attacker's
/// knowledge of the system state).
pub fn orchestrate(
    attack: &TwoStageAttack,
    case: &NetworkCase,
    plan: &MeasurementPlan,
    problem: &DistributedProblem,
    operating_point: &StateVector,
    streams: &SeedStreams,
) -> Result<Orchestration, AttackError> {
    attack.validate()?;
    let channel = attack
        .availability
        .clone()
        .map(|av| AttackedChannel::new(PassThrough, av, streams.stream(AVAILABILITY_STREAM)))
        .transpose()?;
    let integrity = attack
        .integrity
        .as_ref()
        .map(|ia| PreparedIntegrity::prepare(ia, case, plan, problem, operating_point, streams))
        .transpose()?;
    Ok(Orchestration { channel, pass: PassThrough, readings: FalsifiedReadings::new(integrity) })
}
