//! Zone partitioning, tie-lines and the shared-state bookkeeping between
//! neighboring zones.
//!
//! Every tie-line makes both of its endpoint buses shared between the two
//! zones it joins: each zone estimates its own boundary bus and the foreign
//! boundary bus. A zone's local state therefore covers its member buses plus
//! every foreign bus at the far end of one of its tie-lines, in canonical bus
//! order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::NetworkCase;
use crate::state::{Component, Mode};

pub type ZoneId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("bus {0} is not assigned to any zone")]
    UncoveredBus(u32),
    #[error("assignment references unknown bus {0}")]
    UnknownBus(u32),
    #[error("zone {0} has no member buses")]
    EmptyZone(ZoneId),
    #[error("zone {0} has no tie-line to any other zone")]
    IsolatedZone(ZoneId),
    #[error("a partition needs at least 2 zones, got {0}")]
    TooFewZones(usize),
}

/// Bus id to zone id map, as read from `{"bus_id": zone_id}` JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneAssignment(pub BTreeMap<u32, ZoneId>);

impl ZoneAssignment {
    pub fn zone_of(&self, bus: u32) -> Option<ZoneId> {
        self.0.get(&bus).copied()
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

impl FromIterator<(u32, ZoneId)> for ZoneAssignment {
    fn from_iter<T: IntoIterator<Item = (u32, ZoneId)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// The four-zone split of the IEEE 14-bus system.
///
/// Membership is reconstructed from the per-zone meter placement (injection
/// meters at 13 in zone 3 and at 10, 14 in zone 4; flows 6-11 internal to
/// zone 3 and 9-10, 9-14 internal to zone 4) rather than read off a drawing.
pub fn ieee14_default_partition() -> ZoneAssignment {
    let zones: [(ZoneId, &[u32]); 4] =
        [(1, &[1, 2, 5]), (2, &[3, 4, 7, 8]), (3, &[6, 11, 12, 13]), (4, &[9, 10, 14])];
    zones
        .iter()
        .flat_map(|(z, buses)| buses.iter().map(move |b| (*b, *z)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: ZoneId,
    /// Member bus ids.
    pub members: BTreeSet<u32>,
    /// Canonical bus indices held in the local state: members plus foreign
    /// tie-line endpoints, ascending.
    pub local_buses: Vec<usize>,
    /// Canonical bus indices owned by this zone, ascending.
    pub owned: Vec<usize>,
    local_pos: BTreeMap<usize, usize>,
}

impl Zone {
    pub fn n_local(&self) -> usize {
        self.local_buses.len()
    }

    /// Position of a canonical bus index within the local bus list.
    pub fn local_position(&self, bus: usize) -> Option<usize> {
        self.local_pos.get(&bus).copied()
    }

    pub fn owns(&self, bus: usize) -> bool {
        self.owned.binary_search(&bus).is_ok()
    }

    /// Length of the local state vector in the given mode.
    pub fn state_len(&self, mode: Mode) -> usize {
        match mode {
            Mode::Ac => 2 * self.n_local(),
            Mode::Dc => self.n_local(),
        }
    }

    /// Slot of a bus component in the local state vector (magnitudes block
    /// then angles block in AC; angles only in DC).
    pub fn local_slot(&self, bus: usize, component: Component, mode: Mode) -> Option<usize> {
        let pos = self.local_position(bus)?;
        slot_of(pos, self.n_local(), component, mode)
    }

    /// `(bus, component)` for every local slot, in slot order.
    pub fn slot_labels(&self, mode: Mode) -> Vec<(usize, Component)> {
        let mut labels = Vec::with_capacity(self.state_len(mode));
        if mode == Mode::Ac {
            labels.extend(self.local_buses.iter().map(|&b| (b, Component::Vm)));
        }
        labels.extend(self.local_buses.iter().map(|&b| (b, Component::Va)));
        labels
    }
}

/// Slot of component `component` of local bus position `pos` in a state
/// vector over `n` buses.
pub fn slot_of(pos: usize, n: usize, component: Component, mode: Mode) -> Option<usize> {
    match (mode, component) {
        (Mode::Ac, Component::Vm) => Some(pos),
        (Mode::Ac, Component::Va) => Some(n + pos),
        (Mode::Dc, Component::Va) => Some(pos),
        (Mode::Dc, Component::Vm) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TieLine {
    /// Index into `NetworkCase::branches`.
    pub branch: usize,
    /// Zone of the branch's from-bus.
    pub zone_a: ZoneId,
    /// Zone of the branch's to-bus.
    pub zone_b: ZoneId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    zones: Vec<Zone>,
    tie_lines: Vec<TieLine>,
    neighbor_sets: BTreeMap<ZoneId, BTreeSet<ZoneId>>,
    /// Owning zone per canonical bus index.
    owner: Vec<ZoneId>,
    /// Shared bus indices per unordered zone pair `(low, high)`.
    shared: BTreeMap<(ZoneId, ZoneId), BTreeSet<usize>>,
}

pub fn partition_network(case: &NetworkCase, assignment: &ZoneAssignment) -> Result<Partition, PartitionError> {
    for bus in assignment.0.keys() {
        if case.bus_index(*bus).is_none() {
            return Err(PartitionError::UnknownBus(*bus));
        }
    }
    let mut owner = Vec::with_capacity(case.n_bus());
    for bus in case.buses() {
        owner.push(assignment.zone_of(bus.id).ok_or(PartitionError::UncoveredBus(bus.id))?);
    }
    let zone_ids: BTreeSet<ZoneId> = owner.iter().copied().collect();
    let max_zone = zone_ids.iter().copied().max().unwrap_or(0);
    if let Some(empty) = (1..=max_zone).find(|z| !zone_ids.contains(z)) {
        return Err(PartitionError::EmptyZone(empty));
    }
    if zone_ids.contains(&0) {
        return Err(PartitionError::EmptyZone(0));
    }
    if zone_ids.len() < 2 {
        return Err(PartitionError::TooFewZones(zone_ids.len()));
    }

    let mut tie_lines = Vec::new();
    let mut neighbor_sets: BTreeMap<ZoneId, BTreeSet<ZoneId>> =
        zone_ids.iter().map(|&z| (z, BTreeSet::new())).collect();
    let mut shared: BTreeMap<(ZoneId, ZoneId), BTreeSet<usize>> = BTreeMap::new();
    let mut local: BTreeMap<ZoneId, BTreeSet<usize>> = zone_ids.iter().map(|&z| (z, BTreeSet::new())).collect();
    for (pos, z) in owner.iter().enumerate() {
        local.get_mut(z).expect("zone present").insert(pos);
    }
    for (k, br) in case.branches().iter().enumerate() {
        if !br.in_service() {
            continue;
        }
        let f = case.bus_index(br.from_bus).expect("validated");
        let t = case.bus_index(br.to_bus).expect("validated");
        let (za, zb) = (owner[f], owner[t]);
        if za == zb {
            continue;
        }
        tie_lines.push(TieLine { branch: k, zone_a: za, zone_b: zb });
        neighbor_sets.get_mut(&za).expect("zone").insert(zb);
        neighbor_sets.get_mut(&zb).expect("zone").insert(za);
        let entry = shared.entry((za.min(zb), za.max(zb))).or_default();
        entry.insert(f);
        entry.insert(t);
        for z in [za, zb] {
            let set = local.get_mut(&z).expect("zone");
            set.insert(f);
            set.insert(t);
        }
    }
    if let Some((z, _)) = neighbor_sets.iter().find(|(_, n)| n.is_empty()) {
        return Err(PartitionError::IsolatedZone(*z));
    }

    let zones = zone_ids
        .iter()
        .map(|&z| {
            let local_buses: Vec<usize> = local[&z].iter().copied().collect();
            let owned: Vec<usize> = (0..owner.len()).filter(|&b| owner[b] == z).collect();
            let members = owned.iter().map(|&b| case.buses()[b].id).collect();
            let local_pos = local_buses.iter().enumerate().map(|(p, &b)| (b, p)).collect();
            Zone { id: z, members, local_buses, owned, local_pos }
        })
        .collect();

    Ok(Partition { zones, tie_lines, neighbor_sets, owner, shared })
}

impl Partition {
    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone(&self, id: ZoneId) -> Option<&Zone> {
        self.zones.iter().find(|z| z.id == id)
    }

    pub fn zone_ids(&self) -> impl Iterator<Item = ZoneId> + '_ {
        self.zones.iter().map(|z| z.id)
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn tie_lines(&self) -> &[TieLine] {
        &self.tie_lines
    }

    /// `K_κ`: zones adjacent to `zone` through at least one tie-line.
    pub fn neighbors(&self, zone: ZoneId) -> &BTreeSet<ZoneId> {
        static EMPTY: BTreeSet<ZoneId> = BTreeSet::new();
        self.neighbor_sets.get(&zone).unwrap_or(&EMPTY)
    }

    pub fn owner_of(&self, bus: usize) -> ZoneId {
        self.owner[bus]
    }

    pub fn n_bus(&self) -> usize {
        self.owner.len()
    }

    /// Zone adjacency as unordered `(low, high)` pairs.
    pub fn adjacency_pairs(&self) -> BTreeSet<(ZoneId, ZoneId)> {
        self.shared.keys().copied().collect()
    }

    /// Canonical bus indices shared between two zones (empty if not adjacent).
    pub fn shared_buses(&self, a: ZoneId, b: ZoneId) -> BTreeSet<usize> {
        self.shared.get(&(a.min(b), a.max(b))).cloned().unwrap_or_default()
    }
}

/// Shared buses of one ordered zone pair `(κ, ι)` with their positions in
/// both local bus lists and in the auxiliary consensus vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedBlock {
    pub buses: Vec<usize>,
    /// Local bus positions in the first zone of the pair.
    pub local_self: Vec<usize>,
    /// Local bus positions in the second zone of the pair.
    pub local_other: Vec<usize>,
    /// Entries of the auxiliary vector; identical for `(κ, ι)` and `(ι, κ)`.
    pub aux: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedStateMap {
    blocks: BTreeMap<(ZoneId, ZoneId), SharedBlock>,
    share_count: BTreeMap<ZoneId, Vec<usize>>,
    n_aux: usize,
}

pub fn shared_state_map(partition: &Partition) -> SharedStateMap {
    let mut blocks = BTreeMap::new();
    let mut share_count: BTreeMap<ZoneId, Vec<usize>> =
        partition.zones().iter().map(|z| (z.id, vec![0; z.n_local()])).collect();
    let mut n_aux = 0;
    for (&(a, b), buses) in &partition.shared {
        let za = partition.zone(a).expect("zone");
        let zb = partition.zone(b).expect("zone");
        let buses: Vec<usize> = buses.iter().copied().collect();
        let pa: Vec<usize> = buses.iter().map(|&bus| za.local_position(bus).expect("shared bus is local")).collect();
        let pb: Vec<usize> = buses.iter().map(|&bus| zb.local_position(bus).expect("shared bus is local")).collect();
        let aux: Vec<usize> = (n_aux..n_aux + buses.len()).collect();
        n_aux += buses.len();
        for &p in &pa {
            share_count.get_mut(&a).expect("zone")[p] += 1;
        }
        for &p in &pb {
            share_count.get_mut(&b).expect("zone")[p] += 1;
        }
        blocks.insert(
            (a, b),
            SharedBlock { buses: buses.clone(), local_self: pa.clone(), local_other: pb.clone(), aux: aux.clone() },
        );
        blocks.insert((b, a), SharedBlock { buses, local_self: pb, local_other: pa, aux });
    }
    SharedStateMap { blocks, share_count, n_aux }
}

impl SharedStateMap {
    pub fn block(&self, zone: ZoneId, neighbor: ZoneId) -> Option<&SharedBlock> {
        self.blocks.get(&(zone, neighbor))
    }

    /// Canonical bus indices shared by the ordered pair.
    pub fn shared_buses(&self, zone: ZoneId, neighbor: ZoneId) -> BTreeSet<usize> {
        self.block(zone, neighbor).map(|b| b.buses.iter().copied().collect()).unwrap_or_default()
    }

    /// Number of neighbors sharing each local bus position of `zone`.
    pub fn share_count(&self, zone: ZoneId) -> &[usize] {
        self.share_count.get(&zone).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Share counts expanded to local state slots.
    pub fn share_count_slots(&self, zone: ZoneId, mode: Mode) -> Vec<usize> {
        let per_bus = self.share_count(zone);
        match mode {
            Mode::Ac => per_bus.iter().chain(per_bus.iter()).copied().collect(),
            Mode::Dc => per_bus.to_vec(),
        }
    }

    /// Number of auxiliary consensus buses across all pairs.
    pub fn n_aux(&self) -> usize {
        self.n_aux
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{ieee14, parse_case};

    const TWO_BUS: &str = "baseMVA = 100;\nbus = [\n1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n2 1 0 0 0 0 1 0.98 -2.86 230 1 1.1 0.9;\n];\nbranch = [\n1 2 0 0.1 0 0 0 0 0 0 1;\n];\n";

    fn case14_partition() -> Partition {
        partition_network(&ieee14(), &ieee14_default_partition()).unwrap()
    }

    fn ids(case: &NetworkCase, idx: &BTreeSet<usize>) -> BTreeSet<u32> {
        idx.iter().map(|&i| case.buses()[i].id).collect()
    }

    #[test]
    fn two_bus_partition() {
        let case = parse_case(TWO_BUS).unwrap();
        let assignment: ZoneAssignment = [(1, 1), (2, 2)].into_iter().collect();
        let p = partition_network(&case, &assignment).unwrap();
        assert_eq!(p.tie_lines().len(), 1);
        assert_eq!(p.neighbors(1), &BTreeSet::from([2]));
        assert_eq!(p.neighbors(2), &BTreeSet::from([1]));
        let map = shared_state_map(&p);
        assert_eq!(ids(&case, &map.shared_buses(1, 2)), BTreeSet::from([1, 2]));
        assert_eq!(p.zone(1).unwrap().state_len(Mode::Ac), 4);
        assert_eq!(p.zone(2).unwrap().state_len(Mode::Ac), 4);
    }

    #[test]
    fn default_partition_membership() {
        let a = ieee14_default_partition();
        assert_eq!(a.zone_of(4), Some(2));
        assert_eq!(a.zone_of(13), Some(3));
        let p = case14_partition();
        let sizes: Vec<usize> = p.zones().iter().map(|z| z.members.len()).collect();
        assert_eq!(sizes, vec![3, 4, 4, 3]);
        assert_eq!(sizes.iter().sum::<usize>(), 14);
    }

    #[test]
    fn case14_tie_lines_from_branch_scan() {
        let case = ieee14();
        let p = case14_partition();
        let ties: BTreeSet<(u32, u32)> = p
            .tie_lines()
            .iter()
            .map(|t| (case.branches()[t.branch].from_bus, case.branches()[t.branch].to_bus))
            .collect();
        // 2-3 and 2-4 join zone 1 and zone 2 alongside 4-5.
        let expected = BTreeSet::from([(2, 3), (2, 4), (4, 5), (5, 6), (4, 9), (7, 9), (10, 11), (13, 14)]);
        assert_eq!(ties, expected);
        assert_eq!(p.neighbors(2), &BTreeSet::from([1, 4]));
        assert_eq!(p.adjacency_pairs(), BTreeSet::from([(1, 2), (1, 3), (2, 4), (3, 4)]));
    }

    #[test]
    fn case14_shared_buses() {
        let case = ieee14();
        let p = case14_partition();
        let map = shared_state_map(&p);
        let s21 = ids(&case, &map.shared_buses(2, 1));
        assert!(s21.contains(&4) && s21.contains(&5));
        assert_eq!(s21, BTreeSet::from([2, 3, 4, 5]));
        assert_eq!(ids(&case, &map.shared_buses(2, 4)), BTreeSet::from([4, 7, 9]));
        let z2 = p.zone(2).unwrap();
        let bus8 = case.bus_index(8).unwrap();
        assert_eq!(map.share_count(2)[z2.local_position(bus8).unwrap()], 0);
        // bus 4 is shared with both zone 1 and zone 4
        let bus4 = case.bus_index(4).unwrap();
        assert_eq!(map.share_count(2)[z2.local_position(bus4).unwrap()], 2);
    }

    #[test]
    fn missing_bus_is_reported() {
        let case = ieee14();
        let mut a = ieee14_default_partition();
        a.0.remove(&7);
        assert_eq!(partition_network(&case, &a), Err(PartitionError::UncoveredBus(7)));
    }

    #[test]
    fn empty_and_isolated_zones() {
        let case = ieee14();
        let mut a = ieee14_default_partition();
        for z in a.0.values_mut() {
            if *z == 3 {
                *z = 5;
            }
        }
        assert_eq!(partition_network(&case, &a), Err(PartitionError::EmptyZone(3)));
        let single: ZoneAssignment = (1..=14).map(|b| (b, 1)).collect();
        assert_eq!(partition_network(&case, &single), Err(PartitionError::TooFewZones(1)));

        let three = "baseMVA = 100;\nbus = [\n1 3 0 0 0 0 1 1 0 0 1 1 1;\n2 1 0 0 0 0 1 1 0 0 1 1 1;\n3 1 0 0 0 0 1 1 0 0 1 1 1;\n];\nbranch = [\n1 2 0 0.1 0 0 0 0 0 0 1;\n];\n";
        let case = parse_case(three).unwrap();
        let a: ZoneAssignment = [(1, 1), (2, 2), (3, 3)].into_iter().collect();
        assert_eq!(partition_network(&case, &a), Err(PartitionError::IsolatedZone(3)));
    }

    #[test]
    fn symmetry_and_coverage() {
        let case = ieee14();
        let p = case14_partition();
        let map = shared_state_map(&p);
        for a in p.zone_ids() {
            for b in p.zone_ids() {
                assert_eq!(map.shared_buses(a, b), map.shared_buses(b, a));
                assert_eq!(p.neighbors(a).contains(&b), p.neighbors(b).contains(&a));
                if let (Some(x), Some(y)) = (map.block(a, b), map.block(b, a)) {
                    assert_eq!(x.aux, y.aux);
                }
            }
        }
        let mut endpoints = BTreeSet::new();
        for t in p.tie_lines() {
            let br = &case.branches()[t.branch];
            endpoints.insert(case.bus_index(br.from_bus).unwrap());
            endpoints.insert(case.bus_index(br.to_bus).unwrap());
        }
        for bus in 0..14 {
            let in_any = p.adjacency_pairs().iter().any(|&(a, b)| map.shared_buses(a, b).contains(&bus));
            assert_eq!(in_any, endpoints.contains(&bus), "bus index {bus}");
        }
    }

    #[test]
    fn assignment_json() {
        let a = ZoneAssignment::from_json(r#"{"1": 1, "2": 2}"#).unwrap();
        assert_eq!(a.zone_of(2), Some(2));
    }
}
