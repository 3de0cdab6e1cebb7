//! AG2: falsify zone 2 with every link intact and watch the error spread.
//!
//! ```bash
//! cargo run --example ag2_propagation [alpha]
//! ```

use gridse::scenario::{run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alpha = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(-0.15);
    let normal = run_scenario(&ScenarioConfig::preset(ScenarioKind::Normal))?;
    let report = run_scenario(&ScenarioConfig { alpha, ..ScenarioConfig::preset(ScenarioKind::Ag2) })?;
    let e = &report.errors;

    println!("{:>9} {:>8} {:>8} {:>8} {:>8} {:>8}", "iteration", "Z1", "Z2", "Z3", "Z4", "global");
    for i in [0, 1, 2, 4, 9, 19, 49, report.adse.iterations - 1] {
        let zones: Vec<String> = (1..=4).map(|z| format!("{:>7.3}%", e.per_zone_series[&z][i])).collect();
        println!("{:>9} {} {:>7.3}%", i + 1, zones.join(" "), e.global_series[i]);
    }
    println!(
        "global e_l2 {:.3}% vs {:.3}% without attack ({:.1}x)",
        e.global.e_l2_percent,
        normal.errors.global.e_l2_percent,
        e.global.e_l2_percent / normal.errors.global.e_l2_percent
    );
    Ok(())
}
