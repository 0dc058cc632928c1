//! Power-iteration estimates: spectral norm, extreme eigenvalues of
//! symmetric operators.

use crate::linalg::{vector, Matrix};

pub const POWER_MAX_ITERS: usize = 10_000;
const POWER_REL_TOL: f64 = 1e-13;

/// Deterministic start vector with no zero entries.
fn start_vector(n: usize) -> Vec<f64> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * GOLDEN).fract())
        .collect();
    let nv = vector::norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given by
/// its action, estimated by the Rayleigh quotient of power iterates.
pub fn dominant_eigenvalue_psd(n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = start_vector(n);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = apply(&v);
        let rq = vector::dot(&v, &w);
        let nw = vector::norm(&w);
        if nw == 0.0 || !nw.is_finite() {
            return rq.max(0.0);
        }
        let converged = (rq - lambda).abs() <= POWER_REL_TOL * rq.abs();
        lambda = rq;
        v = w.into_iter().map(|x| x / nw).collect();
        if converged {
            break;
        }
    }
    lambda
}

/// Largest singular value of `m`, by power iteration on `MᵀM`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    let sq = dominant_eigenvalue_psd(m.cols(), |v| m.tr_mul_vec(&m.mul_vec(v)));
    sq.max(0.0).sqrt()
}

/// Estimate of the smallest eigenvalue of a symmetric matrix, from power
/// iteration on the shifted operator `σI − A` with `σ = ‖A‖₂`.
///
/// The estimate never lies below the true smallest eigenvalue, up to rounding.
pub fn smallest_eigenvalue_estimate(a: &Matrix) -> f64 {
    assert!(a.is_square());
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    let sigma = spectral_norm(a);
    if sigma == 0.0 {
        return 0.0;
    }
    let top = dominant_eigenvalue_psd(n, |v| {
        let av = a.mul_vec(v);
        v.iter().zip(&av).map(|(x, y)| sigma * x - y).collect()
    });
    sigma - top
}
