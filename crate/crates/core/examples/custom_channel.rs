//! Plug a custom link model into the estimator: here a link that goes
//! silent for a window of iterations and then recovers. Auxiliary updates
//! missed during the outage are not replayed, so the run settles at a
//! different consensus point than the clean one.
//!
//! ```bash
//! cargo run --example custom_channel
//! ```

use std::ops::Range;

use gridse::adse::{run_adse, AdmmConfig, BoundaryMessage, Delivery, DistributedProblem, ExchangeChannel, NoHooks, PassThrough};
use gridse::case::{build_ybus, ground_truth_state, ieee14};
use gridse::measurement::{default_meter_plan_14bus, generate_measurements, MeasurementModel, NoiseModel};
use gridse::metrics::{global_l2, MetricVariant};
use gridse::partition::{ieee14_default_partition, partition_network};
use gridse::state::Mode;
use gridse::wls::Weights;

struct Outage {
    link: (usize, usize),
    window: Range<usize>,
    dropped: usize,
}

impl ExchangeChannel for Outage {
    fn deliver(&mut self, m: BoundaryMessage) -> Delivery {
        let on_link = (m.sender.min(m.receiver), m.sender.max(m.receiver)) == self.link;
        if on_link && self.window.contains(&m.iteration) {
            self.dropped += 1;
            Delivery::Dropped
        } else {
            Delivery::Delivered(m.payload)
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = ieee14();
    let ybus = build_ybus(&case);
    let plan = default_meter_plan_14bus();
    let partition = partition_network(&case, &ieee14_default_partition())?;
    let model = MeasurementModel::new(&case, &ybus, &plan, Mode::Ac)?;
    let truth = ground_truth_state(&case);
    let noise = NoiseModel::default();
    let y = generate_measurements(&model, &truth, &noise, &mut noise.stream())?;
    let problem = DistributedProblem::new(&case, &ybus, &partition, &plan, Mode::Ac, &y, &Weights::from_variance(noise.variance))?;
    let config = AdmmConfig { max_iterations: 400, ..AdmmConfig::default() };

    let clean = run_adse(&problem, &config, &mut PassThrough, &NoHooks)?;
    let mut outage = Outage { link: (2, 4), window: 5..60, dropped: 0 };
    let hit = run_adse(&problem, &config, &mut outage, &NoHooks)?;
    for (name, r) in [("clean", &clean), ("outage", &hit)] {
        println!(
            "{name:>6}: {} iterations, converged {}, e_l2 {:.4}%",
            r.iterations,
            r.converged,
            global_l2(&r.global, &truth, MetricVariant::Full)?
        );
    }
    println!("{} messages dropped during the outage", outage.dropped);
    Ok(())
}
