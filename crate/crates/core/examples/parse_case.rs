//! Parse a MATPOWER case and build its bus admittance matrix.
//!
//! ```bash
//! cargo run --example parse_case [path/to/case.m]
//! ```

use gridse::case::{build_ybus, ground_truth_state, parse_case_with_warnings, IEEE14_CASE};
use gridse::state::Component;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => IEEE14_CASE.to_string(),
    };
    let (case, warnings) = parse_case_with_warnings(&text)?;
    for w in &warnings {
        println!("line {}: {}", w.line, w.message);
    }
    println!("{} buses, {} branches, base {} MVA", case.n_bus(), case.branches().len(), case.base_mva());

    let ybus = build_ybus(&case);
    let truth = ground_truth_state(&case);
    println!("symmetric Y-bus: {}", ybus.is_symmetric());
    println!("{:>4} {:>8} {:>9} {:>10}", "bus", "vm", "va(deg)", "|Y_ii|");
    for (k, bus) in case.buses().iter().enumerate() {
        let va = truth.get(k, Component::Va).unwrap_or(0.0).to_degrees();
        println!("{:>4} {:>8.4} {:>9.3} {:>10.3}", bus.id, bus.vm, va, ybus.y[(k, k)].norm());
    }

    let again = gridse::case::parse_case(&case.to_matpower())?;
    println!("MATPOWER round trip identical: {}", again == case);
    Ok(())
}
