//! Shared builders for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use gridse::adse::{run_adse, AdmmConfig, DistributedProblem, NoHooks, PassThrough};
use gridse::case::{build_ybus, parse_case, NetworkCase};
use gridse::measurement::{dc_jacobian, MeasurementPlan, MeasurementVector, Meter, MeterKind, MeterSymbol, Provenance};
use gridse::partition::{partition_network, ZoneAssignment};
use gridse::state::Mode;
use gridse::wls::Weights;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small DC test network with readings and weights.
pub struct DcSystem {
    pub case: NetworkCase,
    pub assignment: ZoneAssignment,
    pub plan: MeasurementPlan,
    pub y: MeasurementVector,
    pub weights: Vec<f64>,
}

/// Random connected 5-bus network split into zones {1, 2} and {3, 4, 5},
/// each internally connected and joined by at least one tie-line. Every
/// owned bus has a P-injection meter and every branch end at an owned bus
/// a P-flow meter.
pub fn random_dc_system(seed: u64) -> DcSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    edges.insert((1, 2));
    let first: u32 = rng.random_range(3..=5);
    let others: Vec<u32> = (3..=5).filter(|&b| b != first).collect();
    edges.insert((first.min(others[0]), first.max(others[0])));
    let attach = if rng.random_bool(0.5) { first } else { others[0] };
    edges.insert((attach.min(others[1]), attach.max(others[1])));
    if rng.random_bool(0.3) {
        edges.insert((3, 4));
        edges.insert((4, 5));
    }
    let ties: Vec<(u32, u32)> = [1, 2].iter().flat_map(|&a| (3..=5).map(move |b| (a, b))).collect();
    let first_tie = ties[rng.random_range(0..ties.len())];
    edges.insert(first_tie);
    for &t in &ties {
        if rng.random_bool(0.25) {
            edges.insert(t);
        }
    }

    let mut text = String::from("baseMVA = 100;\nbus = [\n");
    for b in 1..=5 {
        text.push_str(&format!("{b} {} 0 0 0 0 1 1 0 230 1 1.1 0.9;\n", if b == 1 { 3 } else { 1 }));
    }
    text.push_str("];\nbranch = [\n");
    for &(f, t) in &edges {
        let x: f64 = rng.random_range(0.05..0.5);
        text.push_str(&format!("{f} {t} 0 {x} 0 0 0 0 0 0 1;\n"));
    }
    text.push_str("];\n");
    let case = parse_case(&text).expect("generated case parses");
    let zone_of = |b: u32| if b <= 2 { 1 } else { 2 };
    let assignment: ZoneAssignment = (1..=5).map(|b| (b, zone_of(b))).collect();

    let mut meters = Vec::new();
    for b in 1..=5u32 {
        meters.push(Meter { kind: MeterKind::PInject, location: MeterSymbol::Injection(b), zone: zone_of(b), boundary: false });
    }
    for &(f, t) in &edges {
        let boundary = zone_of(f) != zone_of(t);
        for (at, other) in [(f, t), (t, f)] {
            meters.push(Meter { kind: MeterKind::PFlow, location: MeterSymbol::Flow(at, other), zone: zone_of(at), boundary });
        }
    }
    let plan = MeasurementPlan::new(meters).expect("valid plan");

    let mut theta = vec![0.0; 5];
    for t in theta.iter_mut().skip(1) {
        *t = rng.random_range(-0.3..0.3);
    }
    let h = dc_jacobian(&case, &plan).expect("jacobian");
    let clean = &h * DVector::from_vec(theta);
    let values = clean.iter().map(|v| v + rng.random_range(-1e-2..1e-2)).collect();
    let weights = (0..plan.len()).map(|_| rng.random_range(0.5..2.0)).collect();
    DcSystem { case, assignment, plan, y: MeasurementVector { values, provenance: Provenance::Noisy }, weights }
}

/// Centralized DC WLS from the normal equations, slack angle fixed at zero.
pub fn dc_wls_oracle(case: &NetworkCase, plan: &MeasurementPlan, y: &[f64], weights: &[f64]) -> Vec<f64> {
    let h = dc_jacobian(case, plan).expect("jacobian");
    let slack = case.slack_index();
    let keep: Vec<usize> = (0..case.n_bus()).filter(|&b| b != slack).collect();
    let hr = DMatrix::from_fn(h.nrows(), keep.len(), |r, c| h[(r, keep[c])]);
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    let gain = hr.transpose() * &w * &hr;
    let rhs = hr.transpose() * &w * DVector::from_column_slice(y);
    let sol = gain.lu().solve(&rhs).expect("observable system");
    let mut theta = vec![0.0; case.n_bus()];
    for (c, &b) in keep.iter().enumerate() {
        theta[b] = sol[c];
    }
    theta
}

/// Assembled DC ADSE angles on clean links.
pub fn dc_adse(system: &DcSystem, config: &AdmmConfig) -> Vec<f64> {
    let ybus = build_ybus(&system.case);
    let partition = partition_network(&system.case, &system.assignment).expect("partition");
    let weights = Weights::PerMeasurement(system.weights.clone());
    let problem =
        DistributedProblem::new(&system.case, &ybus, &partition, &system.plan, Mode::Dc, &system.y, &weights).expect("problem");
    let result = run_adse(&problem, config, &mut PassThrough, &NoHooks).expect("adse");
    result.global.to_flat()
}

/// Tight stopping rule for oracle comparisons.
pub fn oracle_admm() -> AdmmConfig {
    AdmmConfig { max_iterations: 5000, consensus_tol: 1e-12, ..AdmmConfig::default() }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
