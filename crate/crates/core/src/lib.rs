//! Distributed power-system state estimation over partitioned networks,
//! with simulation of communication-layer and measurement-layer attacks.

// `!(x > 0.0)` checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adse;
pub mod attacks;
pub mod case;
pub mod linalg;
pub mod metrics;
pub mod measurement;
pub mod partition;
pub mod rng;
pub mod scenario;
pub mod state;
pub mod wls;
