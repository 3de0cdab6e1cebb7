//! Split a network into zones and list the tie-lines and shared states.
//!
//! ```bash
//! cargo run --example partition [assignment.json]
//! ```

use gridse::case::ieee14;
use gridse::partition::{ieee14_default_partition, partition_network, shared_state_map, ZoneAssignment};
use gridse::state::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = ieee14();
    let assignment = match std::env::args().nth(1) {
        Some(path) => ZoneAssignment::from_json(&std::fs::read_to_string(path)?)?,
        None => ieee14_default_partition(),
    };
    let partition = partition_network(&case, &assignment)?;
    let id = |b: usize| case.buses()[b].id;

    for zone in partition.zones() {
        let local: Vec<u32> = zone.local_buses.iter().map(|&b| id(b)).collect();
        println!(
            "Z{}: members {:?}, local buses {:?}, {} AC state slots, neighbors {:?}",
            zone.id,
            zone.members,
            local,
            zone.state_len(Mode::Ac),
            partition.neighbors(zone.id)
        );
    }
    println!("tie-lines:");
    for t in partition.tie_lines() {
        let br = &case.branches()[t.branch];
        println!("  {}-{} joins Z{} and Z{}", br.from_bus, br.to_bus, t.zone_a, t.zone_b);
    }
    let map = shared_state_map(&partition);
    println!("shared buses per zone pair:");
    for (a, b) in partition.adjacency_pairs() {
        let buses: Vec<u32> = map.shared_buses(a, b).iter().map(|&b| id(b)).collect();
        println!("  Z{a}-Z{b}: {buses:?}");
    }
    println!("{} auxiliary consensus slots", map.n_aux());
    Ok(())
}
