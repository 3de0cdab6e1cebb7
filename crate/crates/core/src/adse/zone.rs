//! Per-zone estimator state and the three per-iteration updates: the local
//! regularized solve, the auxiliary `q` recursion and the multiplier step.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::{solve_spd, weighted_gram, weighted_rhs};
use crate::partition::ZoneId;

/// Local solve failed: `HᵀDH + ρC` is singular for this zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularLocalGain;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneEstimatorState {
    pub zone_id: ZoneId,
    /// Current local estimate `x_κ^{i+1}`.
    pub x: Vec<f64>,
    /// Previous local estimate `x_κ^i`.
    pub x_prev: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    /// Multipliers per neighbor over the pair's shared slots.
    pub lambda: BTreeMap<ZoneId, Vec<f64>>,
    /// Diagonal of `D_κ`.
    pub weights: Vec<f64>,
    /// Diagonal of `C_κ`: neighbors sharing each local slot.
    pub share_count: Vec<f64>,
    /// Slots held fixed (the global angle reference).
    pub pinned: Vec<bool>,
    /// Last iteration at which `q` was updated; `None` before any update.
    pub last_update_iteration: Option<usize>,
}

impl ZoneEstimatorState {
    /// State at `x0` with `q = s = x0` and zero multipliers.
    pub fn new(
        zone_id: ZoneId,
        x0: Vec<f64>,
        weights: Vec<f64>,
        share_count: Vec<f64>,
        pinned: Vec<bool>,
        lambda_dims: &BTreeMap<ZoneId, usize>,
    ) -> Self {
        assert_eq!(x0.len(), share_count.len());
        assert_eq!(x0.len(), pinned.len());
        Self {
            zone_id,
            x_prev: x0.clone(),
            q: x0.clone(),
            s: x0.clone(),
            x: x0,
            lambda: lambda_dims.iter().map(|(&z, &n)| (z, vec![0.0; n])).collect(),
            weights,
            share_count,
            pinned,
            last_update_iteration: None,
        }
    }

    pub fn is_shared(&self, slot: usize) -> bool {
        self.share_count[slot] > 0.0
    }
}

/// Closed-form local update
/// `x = (HᵀDH + ρC)⁻¹ (HᵀD ỹ + ρC q)` with `ỹ = y − h(x^i) + H x^i`.
///
/// `h_at_x` and `jac` are evaluated at `zstate.x`; for a linear model
/// `ỹ = y` and this is the plain regularized normal-equations solve.
/// Pinned slots keep their current value.
pub fn local_update(
    zstate: &ZoneEstimatorState,
    y: &[f64],
    h_at_x: &[f64],
    jac: &DMatrix<f64>,
    rho: f64,
) -> Result<Vec<f64>, SingularLocalGain> {
    let free: Vec<usize> = (0..zstate.x.len()).filter(|&k| !zstate.pinned[k]).collect();
    let jac_free = jac.select_columns(&free);
    let residual: Vec<f64> = y.iter().zip(h_at_x).map(|(y, h)| y - h).collect();
    let mut gain = weighted_gram(&jac_free, &zstate.weights);
    let mut rhs: DVector<f64> = weighted_rhs(&jac_free, &zstate.weights, &residual);
    for (r, &k) in free.iter().enumerate() {
        let c = rho * zstate.share_count[k];
        gain[(r, r)] += c;
        rhs[r] += c * (zstate.q[k] - zstate.x[k]);
    }
    let step = solve_spd(gain, &rhs).ok_or(SingularLocalGain)?;
    let mut x = zstate.x.clone();
    for (r, &k) in free.iter().enumerate() {
        x[k] += step[r];
    }
    Ok(x)
}

/// Outcome of one exchange for one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotAverage {
    /// New `s` per slot; `None` where no neighbor value arrived.
    pub s: Vec<Option<f64>>,
    /// Update scale per slot (1 unless a channel scaled the delivery).
    pub factor: Vec<f64>,
}

/// `q^{i+1} = q^i + s^{i+1} − ½(x^i + s^i)` on shared slots that received
/// data. Slots without data keep `q` and `s` (retention of the last
/// update). Records the iteration when anything changed.
pub fn q_update(zstate: &mut ZoneEstimatorState, average: &SlotAverage, iteration: usize) -> bool {
    let mut updated = false;
    for k in 0..zstate.q.len() {
        if !zstate.is_shared(k) {
            continue;
        }
        if let Some(s_new) = average.s[k] {
            let next = zstate.q[k] + s_new - 0.5 * (zstate.x_prev[k] + zstate.s[k]);
            zstate.q[k] = average.factor[k] * next;
            zstate.s[k] = s_new;
            updated = true;
        }
    }
    // internal slots follow x
    for k in 0..zstate.s.len() {
        if !zstate.is_shared(k) {
            zstate.s[k] = zstate.x[k];
        }
    }
    if updated {
        zstate.last_update_iteration = Some(iteration);
    }
    updated
}

/// `λ_{κι} += ρ (x_κ(ι) − x_{κι})` with `x_{κι}` the pairwise average of the
/// two zones' copies. `own` and `neighbor` are the pair's shared-slot values.
pub fn multiplier_update(lambda: &mut [f64], own: &[f64], neighbor: &[f64], rho: f64) {
    for ((l, a), b) in lambda.iter_mut().zip(own).zip(neighbor) {
        let aux = 0.5 * (a + b);
        *l += rho * (a - aux);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(x: Vec<f64>, q: Vec<f64>, share: Vec<f64>) -> ZoneEstimatorState {
        let n = x.len();
        let mut z = ZoneEstimatorState::new(1, x, vec![1.0; n], share, vec![false; n], &BTreeMap::new());
        z.q = q;
        z
    }

    #[test]
    fn dc_toy_regularized_solve() {
        let z = state(vec![0.0, 0.0], vec![0.0, 5.0], vec![0.0, 1.0]);
        let h = DMatrix::identity(2, 2);
        let x = local_update(&z, &[1.0, 2.0], &[0.0, 0.0], &h, 2.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 4.0).abs() < 1e-14, "{x:?}");
    }

    #[test]
    fn linear_update_ignores_linearization_point() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, -1.0]);
        let y = [1.0, 2.0, -0.5];
        let mut a = state(vec![0.0, 0.0], vec![0.3, 0.7], vec![1.0, 1.0]);
        a.weights = vec![1.0; 3];
        let xa = local_update(&a, &y, &[0.0; 3], &h, 3.0).unwrap();
        a.x = vec![5.0, -2.0];
        let hx: Vec<f64> = (&h * DVector::from_vec(a.x.clone())).iter().copied().collect();
        let xb = local_update(&a, &y, &hx, &h, 3.0).unwrap();
        for (p, q) in xa.iter().zip(&xb) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn large_rho_pulls_shared_slots_to_q() {
        let z = state(vec![0.0, 0.0], vec![0.0, 5.0], vec![0.0, 1.0]);
        let h = DMatrix::identity(2, 2);
        let x = local_update(&z, &[1.0, 2.0], &[0.0, 0.0], &h, 1e9).unwrap();
        assert!((x[1] - 5.0).abs() < 1e-6);
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unobserved_internal_slot_is_singular() {
        let z = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(local_update(&z, &[1.0], &[0.0], &h, 10.0), Err(SingularLocalGain));
    }

    #[test]
    fn pinned_slot_stays_put() {
        let mut z = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]);
        z.pinned = vec![true, false];
        let h = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let x = local_update(&z, &[0.25], &[0.0], &h, 10.0).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] + 0.25).abs() < 1e-14);
    }

    #[test]
    fn q_recursion() {
        // consensus already reached
        let mut z = state(vec![1.0], vec![0.0], vec![1.0]);
        z.q = vec![0.0];
        z.x_prev = vec![0.0];
        z.s = vec![0.0];
        let avg = SlotAverage { s: vec![Some(0.0)], factor: vec![1.0] };
        q_update(&mut z, &avg, 0);
        assert_eq!(z.q, vec![0.0]);

        let mut z = state(vec![1.0], vec![1.0], vec![1.0]);
        z.x_prev = vec![1.0];
        z.s = vec![1.0];
        let avg = SlotAverage { s: vec![Some(2.0)], factor: vec![1.0] };
        assert!(q_update(&mut z, &avg, 3));
        assert_eq!(z.q, vec![2.0]);
        assert_eq!(z.last_update_iteration, Some(3));

        // dropped: q and i* unchanged
        let avg = SlotAverage { s: vec![None], factor: vec![1.0] };
        assert!(!q_update(&mut z, &avg, 4));
        assert_eq!(z.q, vec![2.0]);
        assert_eq!(z.last_update_iteration, Some(3));
    }

    #[test]
    fn multiplier_step() {
        let mut l = vec![0.0, 0.0];
        multiplier_update(&mut l, &[1.0, 2.0], &[1.0, 2.0], 10.0);
        assert_eq!(l, vec![0.0, 0.0]);

        // gap to the auxiliary variable of 0.1 with ρ = 10
        let mut l = vec![0.0];
        let mut m = vec![0.0];
        multiplier_update(&mut l, &[1.2], &[1.0], 10.0);
        multiplier_update(&mut m, &[1.0], &[1.2], 10.0);
        assert!((l[0] - 1.0).abs() < 1e-12);
        assert!((m[0] + 1.0).abs() < 1e-12);
    }
}
