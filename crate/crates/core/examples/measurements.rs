//! Evaluate the meter plan at the operating point and draw noisy readings.
//!
//! ```bash
//! cargo run --example measurements
//! ```

use gridse::case::{build_ybus, ground_truth_state, ieee14};
use gridse::measurement::{default_meter_plan_14bus, generate_measurements, MeasurementModel, NoiseModel};
use gridse::state::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = ieee14();
    let ybus = build_ybus(&case);
    let plan = default_meter_plan_14bus();
    let model = MeasurementModel::new(&case, &ybus, &plan, Mode::Ac)?;
    let truth = ground_truth_state(&case);

    let clean = model.h(&truth)?;
    let noise = NoiseModel { seed: 1, ..NoiseModel::default() };
    let noisy = generate_measurements(&model, &truth, &noise, &mut noise.stream())?;
    println!("{:>4} {:>6} {:>12} {:>9} {:>9}", "k", "zone", "meter", "h(x)", "y");
    for (k, m) in plan.meters().iter().enumerate() {
        println!("{k:>4} {:>6} {:>12} {:>9.4} {:>9.4}", m.zone, m.to_string(), clean[k], noisy.values[k]);
    }

    let jac = model.jacobian(&truth)?;
    let nnz = jac.iter().filter(|v| **v != 0.0).count();
    println!("Jacobian {}x{}, {nnz} non-zeros", jac.nrows(), jac.ncols());
    for (zone, range) in plan.zone_ranges() {
        println!("Z{zone}: readings {range:?}");
    }
    Ok(())
}
