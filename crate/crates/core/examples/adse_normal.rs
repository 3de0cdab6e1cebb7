//! Distributed estimation under normal operation, compared with centralized WLS.
//!
//! ```bash
//! cargo run --example adse_normal [workers]
//! ```

use gridse::adse::{run_adse, AdmmConfig, DistributedProblem, NoHooks, PassThrough};
use gridse::case::{build_ybus, ground_truth_state, ieee14};
use gridse::measurement::{default_meter_plan_14bus, generate_measurements, MeasurementModel, NoiseModel};
use gridse::metrics::{global_l2, ErrorReport, MetricVariant};
use gridse::partition::{ieee14_default_partition, partition_network};
use gridse::state::{Mode, StateVector};
use gridse::wls::{wls_estimate, Weights, WlsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let workers = std::env::args().nth(1).map(|w| w.parse()).transpose()?.unwrap_or(1);
    let case = ieee14();
    let ybus = build_ybus(&case);
    let plan = default_meter_plan_14bus();
    let partition = partition_network(&case, &ieee14_default_partition())?;
    let model = MeasurementModel::new(&case, &ybus, &plan, Mode::Ac)?;
    let truth = ground_truth_state(&case);
    let noise = NoiseModel { seed: 3, ..NoiseModel::default() };
    let y = generate_measurements(&model, &truth, &noise, &mut noise.stream())?;
    let weights = Weights::from_variance(noise.variance);

    let wls = wls_estimate(&case, &model, &y, &WlsConfig::default())?;
    let problem = DistributedProblem::new(&case, &ybus, &partition, &plan, Mode::Ac, &y, &weights)?;
    let config = AdmmConfig { max_iterations: 300, workers, ..AdmmConfig::default() };
    let result = run_adse(&problem, &config, &mut PassThrough, &NoHooks)?;

    let trajectory: Vec<StateVector> = (0..result.iterations).map(|i| result.global_at(&problem, i)).collect();
    let report = ErrorReport::build(&partition, &truth, &result.global, &trajectory, MetricVariant::Full)?;
    for i in [0, 4, 9, 24, 49, 99, result.iterations - 1].into_iter().filter(|&i| i < result.iterations) {
        println!("iteration {:>3}: global e_l2 {:.4}%, consensus residual {:.2e}", i + 1, report.global_series[i], result.consensus_residual[i]);
    }
    println!("converged: {} after {} iterations", result.converged, result.iterations);
    for (zone, s) in &report.per_zone {
        println!("Z{zone}: e_l2 {:.4}%", s.e_l2_percent);
    }
    println!(
        "WLS e_l2 {:.4}%, ADSE e_l2 {:.4}%, ADSE vs WLS {:.2e}%",
        global_l2(&wls.state, &truth, MetricVariant::Full)?,
        report.global.e_l2_percent,
        global_l2(&result.global, &wls.state, MetricVariant::Full)?
    );
    Ok(())
}
