//! Boundary message exchange between neighboring zones.

use crate::partition::ZoneId;

/// Shared-slot values one zone sends to a neighbor in one iteration.
///
/// The payload follows the slot order of the pair's shared block: the
/// magnitudes of the shared buses, then their angles (angles only in DC).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMessage {
    pub sender: ZoneId,
    pub receiver: ZoneId,
    pub iteration: usize,
    pub payload: Vec<f64>,
}

/// What the receiving zone gets for one message.
#[derive(Debug, Clone, PartialEq)]
pub enum Delivery {
    Delivered(Vec<f64>),
    /// Delivered, but the receiver scales its auxiliary update by `factor`.
    Scaled { payload: Vec<f64>, factor: f64 },
    Dropped,
}

impl Delivery {
    pub fn is_dropped(&self) -> bool {
        matches!(self, Delivery::Dropped)
    }
}

/// A communication link model. Called sequentially, inside the exchange
/// barrier, in ascending (receiver, sender) order.
pub trait ExchangeChannel {
    fn deliver(&mut self, message: BoundaryMessage) -> Delivery;
}

/// Ideal links: every message arrives unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThrough;

impl ExchangeChannel for PassThrough {
    fn deliver(&mut self, message: BoundaryMessage) -> Delivery {
        Delivery::Delivered(message.payload)
    }
}

impl<C: ExchangeChannel + ?Sized> ExchangeChannel for &mut C {
    fn deliver(&mut self, message: BoundaryMessage) -> Delivery {
        (**self).deliver(message)
    }
}

impl<C: ExchangeChannel + ?Sized> ExchangeChannel for Box<C> {
    fn deliver(&mut self, message: BoundaryMessage) -> Delivery {
        (**self).deliver(message)
    }
}
