//! False data injection against a zone's meter readings.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::AttackError;
use crate::case::NetworkCase;
use crate::measurement::{MeasurementPlan, MeterSymbol};
use crate::partition::{Zone, ZoneId};
use crate::state::{Component, Mode};

/// Attack vector `a` (zero outside `indices`) and falsified readings `y + a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructedAttack {
    /// Compromised rows of `H`, ascending.
    pub indices: Vec<usize>,
    pub a: Vec<f64>,
    pub y_false: Vec<f64>,
}

/// `a(i) = (H b)(i)` for `i` in `indices`, 0 elsewhere.
pub fn construct_attack_at(indices: &[usize], h: &DMatrix<f64>, y: &[f64], b: &[f64]) -> Result<ConstructedAttack, AttackError> {
    if b.len() != h.ncols() {
        return Err(AttackError::Domain(format!("b has {} entries for {} state slots", b.len(), h.ncols())));
    }
    if y.len() != h.nrows() {
        return Err(AttackError::Domain(format!("{} readings for {} rows of H", y.len(), h.nrows())));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= h.nrows()) {
        return Err(AttackError::Domain(format!("index {i} outside {} readings", h.nrows())));
    }
    let hb = h * DVector::from_column_slice(b);
    let mut indices = indices.to_vec();
    indices.sort_unstable();
    indices.dedup();
    let mut a = vec![0.0; y.len()];
    for &i in &indices {
        a[i] = hb[i];
    }
    let y_false = y.iter().zip(&a).map(|(y, a)| y + a).collect();
    Ok(ConstructedAttack { indices, a, y_false })
}

/// Random attack: `mu` distinct rows sampled uniformly.
pub fn construct_attack(mu: usize, h: &DMatrix<f64>, y: &[f64], b: &[f64], rng: &mut impl Rng) -> Result<ConstructedAttack, AttackError> {
    if mu > h.nrows() {
        return Err(AttackError::Domain(format!("cannot pick {mu} of {} readings", h.nrows())));
    }
    let indices = rand::seq::index::sample(rng, h.nrows(), mu).into_vec();
    construct_attack_at(&indices, h, y, b)
}

/// `α·b₀` at the magnitude slot of `bus` in `zone`'s local state, 0 elsewhere.
pub fn target_injection_vector(case: &NetworkCase, zone: &Zone, mode: Mode, bus: u32, alpha: f64, b0: f64) -> Result<Vec<f64>, AttackError> {
    let idx = case
        .bus_index(bus)
        .filter(|&i| zone.owns(i))
        .ok_or_else(|| AttackError::Domain(format!("bus {bus} is not in zone {}", zone.id)))?;
    let slot = zone
        .local_slot(idx, Component::Vm, mode)
        .ok_or_else(|| AttackError::Domain("a magnitude target needs the AC model".into()))?;
    let mut b = vec![0.0; zone.state_len(mode)];
    b[slot] = alpha * b0;
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetedIndices {
    /// Global plan indices, ascending.
    pub indices: Vec<usize>,
    /// Requested symbols with no reading in the zone.
    pub skipped: Vec<MeterSymbol>,
}

/// Plan indices of every reading (P and Q) at the requested meters in
/// `zone`. Flow symbols match either orientation.
pub fn targeted_index_set(plan: &MeasurementPlan, requested: &[MeterSymbol], zone: ZoneId) -> Result<TargetedIndices, AttackError> {
    let range = plan.zone_range(zone);
    let mut indices = Vec::new();
    let mut skipped = Vec::new();
    for &symbol in requested {
        let hits: Vec<usize> = range
            .clone()
            .filter(|&k| {
                let loc = plan.meters()[k].location;
                loc == symbol || matches!((loc, symbol), (MeterSymbol::Flow(a, b), MeterSymbol::Flow(c, d)) if a == d && b == c)
            })
            .collect();
        if hits.is_empty() {
            skipped.push(symbol);
        }
        indices.extend(hits);
    }
    indices.sort_unstable();
    indices.dedup();
    if indices.is_empty() {
        return Err(AttackError::EmptyTargetSet { zone });
    }
    Ok(TargetedIndices { indices, skipped })
}
