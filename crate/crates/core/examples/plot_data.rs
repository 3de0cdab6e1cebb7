//! Write CSV traces and the JSON report of a run for plotting.
//!
//! ```bash
//! cargo run --example plot_data [out_dir]
//! ```

use std::path::PathBuf;

use gridse::scenario::{emit_plot_data, run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("gridse-plot"));
    for kind in [ScenarioKind::Normal, ScenarioKind::Ag1Full, ScenarioKind::Ag2] {
        let report = run_scenario(&ScenarioConfig::preset(kind))?;
        let dir = out.join(format!("{kind:?}").to_lowercase());
        let files = emit_plot_data(&report, &dir)?;
        for f in files.all() {
            println!("{}", f.display());
        }
    }
    Ok(())
}
