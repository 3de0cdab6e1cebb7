//! Centralized WLS estimation over several noise realizations.
//!
//! ```bash
//! cargo run --example wls_benchmark
//! ```

use gridse::case::{build_ybus, ground_truth_state, ieee14};
use gridse::measurement::{default_meter_plan_14bus, generate_measurements, MeasurementModel, NoiseModel};
use gridse::metrics::l2_error;
use gridse::state::{Mode, Reference};
use gridse::wls::{wls_estimate, WlsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = ieee14();
    let ybus = build_ybus(&case);
    let model = MeasurementModel::new(&case, &ybus, &default_meter_plan_14bus(), Mode::Ac)?;
    let truth = ground_truth_state(&case);

    for reference in [Reference::SlackVoltage, Reference::SlackAngle] {
        let config = WlsConfig { reference, ..WlsConfig::default() };
        let mut total = 0.0;
        for seed in 0..10 {
            let noise = NoiseModel { seed, ..NoiseModel::default() };
            let y = generate_measurements(&model, &truth, &noise, &mut noise.stream())?;
            let est = wls_estimate(&case, &model, &y, &config)?;
            let e = l2_error(&est.state.to_flat(), &truth.to_flat())?;
            total += e;
            println!("{reference:?} seed {seed}: e_l2 {e:.4}% in {} Gauss-Newton steps", est.iterations_used);
        }
        println!("{reference:?} mean e_l2 {:.4}%\n", total / 10.0);
    }
    Ok(())
}
