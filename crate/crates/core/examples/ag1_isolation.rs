//! AG1: cut zone 2 off, then falsify its readings. Zones that no longer hear
//! from zone 2 are unaffected by the falsification.
//!
//! ```bash
//! cargo run --example ag1_isolation [seed]
//! ```

use gridse::scenario::{run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let run = |kind| run_scenario(&ScenarioConfig { seed, ..ScenarioConfig::preset(kind) });
    let normal = run(ScenarioKind::Normal)?;
    let avail = run(ScenarioKind::Ag1Avail)?;
    let full = run(ScenarioKind::Ag1Full)?;

    println!("{:>5} {:>9} {:>10} {:>9}", "zone", "normal", "ag1-avail", "ag1-full");
    for z in 1..=4 {
        println!("{:>5} {:>8.3}% {:>9.3}% {:>8.3}%", format!("Z{z}"), normal.zone_error(z), avail.zone_error(z), full.zone_error(z));
    }
    if let Some(a) = &full.attack {
        let skipped: Vec<String> = a.skipped_meters.iter().map(|m| m.to_string()).collect();
        println!("compromised readings {:?}; requested meters without a reading: {}", a.compromised_indices, skipped.join(", "));
    }
    for z in [1, 3, 4] {
        let same = avail.errors.per_zone_series[&z] == full.errors.per_zone_series[&z];
        println!("Z{z} trajectory identical with and without falsification: {same}");
    }
    Ok(())
}
