//! In the linear DC model the distributed estimate converges to the
//! centralized solution of the normal equations.
//!
//! ```bash
//! cargo run --example dc_oracle
//! ```

use gridse::adse::{run_adse, AdmmConfig, DistributedProblem, NoHooks, PassThrough};
use gridse::case::{build_ybus, ground_truth_state, ieee14};
use gridse::measurement::{default_meter_plan_14bus, generate_measurements, MeasurementModel, NoiseModel};
use gridse::partition::{ieee14_default_partition, partition_network};
use gridse::state::Mode;
use gridse::wls::{wls_estimate, Weights, WlsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = ieee14();
    let ybus = build_ybus(&case);
    let plan = default_meter_plan_14bus().active_power_only();
    let partition = partition_network(&case, &ieee14_default_partition())?;
    let model = MeasurementModel::new(&case, &ybus, &plan, Mode::Dc)?;
    let truth = ground_truth_state(&case).in_mode(Mode::Dc);
    let noise = NoiseModel { seed: 7, ..NoiseModel::default() };
    let y = generate_measurements(&model, &truth, &noise, &mut noise.stream())?;
    let weights = Weights::from_variance(noise.variance);

    let wls = wls_estimate(&case, &model, &y, &WlsConfig { weights: weights.clone(), ..WlsConfig::default() })?;
    let problem = DistributedProblem::new(&case, &ybus, &partition, &plan, Mode::Dc, &y, &weights)?;
    for max_iterations in [25, 50, 100, 200, 400] {
        let config = AdmmConfig { max_iterations, consensus_tol: 1e-12, ..AdmmConfig::default() };
        let result = run_adse(&problem, &config, &mut PassThrough, &NoHooks)?;
        let gap = result.global.to_flat().iter().zip(wls.state.to_flat()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!("{:>4} iterations: max |ADSE - WLS| = {gap:.3e} rad", result.iterations);
    }
    Ok(())
}
