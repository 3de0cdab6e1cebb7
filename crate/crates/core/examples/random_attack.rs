//! A custom attack from JSON: `mu` readings of a zone drawn at random.
//!
//! ```bash
//! cargo run --example random_attack [mu]
//! ```

use gridse::scenario::{run_scenario, AttackSpec, ScenarioConfig, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mu: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let json = format!(r#"{{"goal": "ag2", "zone": 2, "bus": 4, "alpha": -0.15, "mu": {mu}, "integrity_start": 2}}"#);
    let spec = AttackSpec::from_json(&json)?;
    for seed in 0..5 {
        let config = ScenarioConfig { scenario: ScenarioKind::Custom, attack: Some(spec.clone()), seed, ..ScenarioConfig::default() };
        let report = run_scenario(&config)?;
        let a = report.attack.as_ref().expect("attack summary");
        let zones: Vec<String> = (1..=4).map(|z| format!("Z{z} {:6.2}%", report.zone_error(z))).collect();
        println!("seed {seed}: readings {:?} -> {}", a.compromised_indices, zones.join("  "));
    }
    Ok(())
}
