//! Small dense solves shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Pivots below this fraction of the largest diagonal entry are treated as
/// zero when factoring a gain matrix.
const PIVOT_RTOL: f64 = 1e-13;

/// Solve the symmetric positive definite system `a x = b` by Cholesky.
/// Returns `None` when `a` is not numerically positive definite.
pub fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_RTOL * scale) {
        return None;
    }
    Some(chol.solve(b))
}

/// `Hᵀ D H` for diagonal weights `d`.
pub fn weighted_gram(h: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut dh = h.clone();
    for (mut row, w) in dh.row_iter_mut().zip(d) {
        row *= *w;
    }
    h.transpose() * dh
}

/// `Hᵀ D r` for diagonal weights `d`.
pub fn weighted_rhs(h: &DMatrix<f64>, d: &[f64], r: &[f64]) -> DVector<f64> {
    let dr = DVector::from_iterator(r.len(), r.iter().zip(d).map(|(r, w)| r * w));
    h.transpose() * dr
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_gain_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(solve_spd(a, &DVector::from_vec(vec![1.0, 1.0])).is_none());
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_spd(a, &DVector::from_vec(vec![2.0, 2.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
    }
}
