//! Probabilistic link cuts: delivery probability, the drop log and the
//! effect on each zone's error.
//!
//! ```bash
//! cargo run --example availability_attack
//! ```

use gridse::attacks::{delivery_probability, AttackGoal};
use gridse::scenario::{run_scenario, AttackSpec, ScenarioConfig, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>5} {:>5} {:>5} {:>6}", "p_u", "p_A", "zeta", "pi_r");
    for (p_u, p_a, zeta) in [(1.0, 1.0, 1.0), (1.0, 1.0, 0.3), (0.95, 0.5, 0.8), (1.0, 0.0, 1.0)] {
        println!("{p_u:>5} {p_a:>5} {zeta:>5} {:>6.3}", delivery_probability(p_u, p_a, zeta)?);
    }

    for zeta in [0.0, 0.5, 0.9, 1.0] {
        let spec = AttackSpec { p_a: 1.0, ..AttackSpec::preset(AttackGoal::Ag1AvailabilityOnly, -0.15, zeta) };
        let config = ScenarioConfig { scenario: ScenarioKind::Custom, attack: Some(spec), seed: 3, ..ScenarioConfig::default() };
        let report = run_scenario(&config)?;
        let dropped = report.attack.as_ref().map_or(0, |a| a.dropped.len());
        let zones: Vec<String> = (1..=4).map(|z| format!("Z{z} {:6.2}%", report.zone_error(z))).collect();
        println!("zeta {zeta:.1}: {dropped:>3} dropped link-iterations, {}", zones.join("  "));
    }
    Ok(())
}
