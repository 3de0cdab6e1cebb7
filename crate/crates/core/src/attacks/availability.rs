//! Data availability attack on inter-zone links.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::adse::{BoundaryMessage, Delivery, ExchangeChannel};
use crate::partition::ZoneId;

/// Probability that a boundary update is received:
/// `π_r = p_u·p_A·(1 − ζ) + p_u·(1 − p_A)`.
pub fn delivery_probability(p_u: f64, p_a: f64, zeta: f64) -> Result<f64, AttackError> {
    for (name, v) in [("p_u", p_u), ("p_A", p_a), ("zeta", zeta)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(AttackError::Domain(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    Ok(p_u * p_a * (1.0 - zeta) + p_u * (1.0 - p_a))
}

/// How an attacked link affects the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DropModel {
    /// Each message is delivered or dropped; a drop retains the receiver's
    /// last auxiliary update.
    #[default]
    BinaryDrop,
    /// Experimental: every message arrives and the receiver's auxiliary
    /// update is multiplied by `π_r`.
    ScaledUpdate,
}

/// Undirected zone pair with the smaller id first.
pub fn link(a: ZoneId, b: ZoneId) -> (ZoneId, ZoneId) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityAttack {
    pub target_links: BTreeSet<(ZoneId, ZoneId)>,
    pub start_iteration: usize,
    pub p_u: f64,
    pub p_a: f64,
    pub zeta: f64,
    #[serde(default)]
    pub model: DropModel,
}

impl AvailabilityAttack {
    /// Certain isolation of `links` from `start_iteration` on.
    pub fn certain(links: impl IntoIterator<Item = (ZoneId, ZoneId)>, start_iteration: usize) -> Self {
        Self {
            target_links: links.into_iter().map(|(a, b)| link(a, b)).collect(),
            start_iteration,
            p_u: 1.0,
            p_a: 1.0,
            zeta: 1.0,
            model: DropModel::BinaryDrop,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        self.delivery_probability().map(|_| ())?;
        if let Some(&(a, b)) = self.target_links.iter().find(|(a, b)| a == b) {
            return Err(AttackError::Domain(format!("link ({a}, {b}) joins a zone to itself")));
        }
        Ok(())
    }

    pub fn delivery_probability(&self) -> Result<f64, AttackError> {
        delivery_probability(self.p_u, self.p_a, self.zeta)
    }

    pub fn targets(&self, a: ZoneId, b: ZoneId) -> bool {
        self.target_links.contains(&link(a, b))
    }
}

/// A dropped link in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DropEvent {
    pub iteration: usize,
    pub link: (ZoneId, ZoneId),
}

/// Channel wrapper that applies an [`AvailabilityAttack`].
///
/// The outcome is drawn once per (link, iteration) and applies to both
/// directions. Each draw consumes three uniforms (transmission, attack,
/// loss) so the stream position never depends on earlier outcomes.
#[derive(Debug, Clone)]
pub struct AttackedChannel<C> {
    inner: C,
    attack: AvailabilityAttack,
    pi_r: f64,
    rng: ChaCha8Rng,
    outcomes: BTreeMap<(usize, (ZoneId, ZoneId)), bool>,
    log: Vec<DropEvent>,
}

impl<C: ExchangeChannel> AttackedChannel<C> {
    pub fn new(inner: C, attack: AvailabilityAttack, rng: ChaCha8Rng) -> Result<Self, AttackError> {
        attack.validate()?;
        let pi_r = attack.delivery_probability()?;
        Ok(Self { inner, attack, pi_r, rng, outcomes: BTreeMap::new(), log: Vec::new() })
    }

    /// Dropped (iteration, link) pairs so far, in draw order.
    pub fn drop_log(&self) -> &[DropEvent] {
        &self.log
    }

    pub fn attack(&self) -> &AvailabilityAttack {
        &self.attack
    }

    fn delivered(&mut self, iteration: usize, l: (ZoneId, ZoneId)) -> bool {
        if let Some(&d) = self.outcomes.get(&(iteration, l)) {
            return d;
        }
        // iterations before this one can no longer be queried
        self.outcomes.retain(|&(i, _), _| i >= iteration);
        let u_tx: f64 = self.rng.random();
        let u_attack: f64 = self.rng.random();
        let u_loss: f64 = self.rng.random();
        let transmitted = u_tx < self.attack.p_u;
        let lost = u_attack < self.attack.p_a && u_loss < self.attack.zeta;
        let delivered = transmitted && !lost;
        if !delivered {
            self.log.push(DropEvent { iteration, link: l });
        }
        self.outcomes.insert((iteration, l), delivered);
        delivered
    }
}

impl<C: ExchangeChannel> ExchangeChannel for AttackedChannel<C> {
    fn deliver(&mut self, message: BoundaryMessage) -> Delivery {
        let l = link(message.sender, message.receiver);
        if message.iteration < self.attack.start_iteration || !self.attack.targets(l.0, l.1) {
            return self.inner.deliver(message);
        }
        match self.attack.model {
            DropModel::BinaryDrop => {
                if self.delivered(message.iteration, l) {
                    self.inner.deliver(message)
                } else {
                    Delivery::Dropped
                }
            }
            DropModel::ScaledUpdate => match self.inner.deliver(message) {
                Delivery::Delivered(payload) => Delivery::Scaled { payload, factor: self.pi_r },
                Delivery::Scaled { payload, factor } => Delivery::Scaled { payload, factor: factor * self.pi_r },
                Delivery::Dropped => Delivery::Dropped,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adse::PassThrough;
    use crate::rng::{SeedStreams, AVAILABILITY_STREAM};

    fn msg(sender: ZoneId, receiver: ZoneId, iteration: usize) -> BoundaryMessage {
        BoundaryMessage { sender, receiver, iteration, payload: vec![1.0] }
    }

    fn channel(attack: AvailabilityAttack, seed: u64) -> AttackedChannel<PassThrough> {
        AttackedChannel::new(PassThrough, attack, SeedStreams::new(seed).stream(AVAILABILITY_STREAM)).unwrap()
    }

    #[test]
    fn probability_examples() {
        assert_eq!(delivery_probability(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(delivery_probability(1.0, 0.0, 0.42).unwrap(), 1.0);
        assert!((delivery_probability(1.0, 1.0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(delivery_probability(1.2, 0.0, 0.0), Err(AttackError::Domain(_))));
        assert!(matches!(delivery_probability(1.0, -0.1, 0.0), Err(AttackError::Domain(_))));
    }

    #[test]
    fn certain_attack_isolates_from_start() {
        let mut ch = channel(AvailabilityAttack::certain([(1, 2), (2, 4)], 2), 0);
        assert!(!ch.deliver(msg(1, 2, 1)).is_dropped());
        for it in 2..6 {
            assert!(ch.deliver(msg(1, 2, it)).is_dropped());
            assert!(ch.deliver(msg(2, 1, it)).is_dropped());
            assert!(ch.deliver(msg(4, 2, it)).is_dropped());
            assert!(!ch.deliver(msg(1, 3, it)).is_dropped());
            assert!(!ch.deliver(msg(3, 4, it)).is_dropped());
        }
        assert_eq!(ch.drop_log().len(), 8);
    }

    #[test]
    fn zero_attack_is_pass_through() {
        let attack = AvailabilityAttack { p_a: 0.0, ..AvailabilityAttack::certain([(1, 2)], 0) };
        let mut ch = channel(attack, 3);
        for it in 0..50 {
            assert_eq!(ch.deliver(msg(1, 2, it)), Delivery::Delivered(vec![1.0]));
        }
    }

    #[test]
    fn both_directions_share_an_outcome() {
        let attack = AvailabilityAttack { zeta: 0.5, ..AvailabilityAttack::certain([(1, 2)], 0) };
        let mut ch = channel(attack, 11);
        let mut drops = 0;
        for it in 0..200 {
            let a = ch.deliver(msg(1, 2, it)).is_dropped();
            let b = ch.deliver(msg(2, 1, it)).is_dropped();
            assert_eq!(a, b);
            drops += a as usize;
        }
        assert!((60..140).contains(&drops), "{drops}");
    }

    #[test]
    fn drop_pattern_is_reproducible() {
        let attack = AvailabilityAttack { zeta: 0.4, p_u: 0.9, ..AvailabilityAttack::certain([(1, 2), (2, 4)], 0) };
        let run = |seed| {
            let mut ch = channel(attack.clone(), seed);
            for it in 0..100 {
                for (s, r) in [(2, 1), (4, 2), (1, 2), (2, 4)] {
                    ch.deliver(msg(s, r, it));
                }
            }
            ch.drop_log().to_vec()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn scaled_mode_scales_instead_of_dropping() {
        let attack = AvailabilityAttack { zeta: 0.3, model: DropModel::ScaledUpdate, ..AvailabilityAttack::certain([(1, 2)], 0) };
        let mut ch = channel(attack, 0);
        match ch.deliver(msg(1, 2, 0)) {
            Delivery::Scaled { factor, .. } => assert!((factor - 0.7).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }
}
