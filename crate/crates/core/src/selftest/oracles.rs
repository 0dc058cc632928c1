//! Brute-force reference computations used by the self-test.

use crate::linalg::{vector, Matrix};

/// Dimension of `span(vectors)` by modified Gram–Schmidt with one
/// re-orthogonalisation pass. A vector counts as new when its residual
/// exceeds `tol_rel` times the largest input norm.
pub fn span_dimension(vectors: &[Vec<f64>], tol_rel: f64) -> usize {
    let scale = vectors.iter().map(|v| vector::norm(v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = vector::dot(q, &r);
                vector::axpy(-c, q, &mut r);
            }
        }
        let nr = vector::norm(&r);
        if nr > tol_rel * scale {
            basis.push(vector::scale(&r, 1.0 / nr));
        }
    }
    basis.len()
}

/// The vectors `(−A)^i B e_j`, `i < n`, `j < m`, built by repeated
/// matrix-vector products.
pub fn krylov_vectors(a: &Matrix, b: &Matrix) -> Vec<Vec<f64>> {
    let n = a.rows();
    let mut out = Vec::with_capacity(n * b.cols());
    for j in 0..b.cols() {
        let mut v = b.col(j);
        for _ in 0..n {
            out.push(v.clone());
            v = vector::scale(&a.mul_vec(&v), -1.0);
        }
    }
    out
}

/// Plain gradient descent `x ← x − γ(Ax + b)`, returning all iterates.
pub fn plain_gd(a: &Matrix, b: &[f64], x0: &[f64], gamma: f64, iters: usize) -> Vec<Vec<f64>> {
    let mut xs = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    for _ in 0..iters {
        let ax = a.mul_vec(&x);
        x = (0..x.len()).map(|i| x[i] - gamma * (ax[i] + b[i])).collect();
        xs.push(x.clone());
    }
    xs
}

/// Minimises the strongly convex quadratic `½xᵀHx − gᵀx` by gradient descent
/// with step `1/λ_max(H)` until the gradient norm is at most `tol`.
pub fn minimise_quadratic(h: &Matrix, g: &[f64], lambda_max: f64, tol: f64, max_iters: usize) -> Vec<f64> {
    let step = 1.0 / lambda_max;
    let mut x = vec![0.0; g.len()];
    for _ in 0..max_iters {
        let grad = vector::sub(&h.mul_vec(&x), g);
        if vector::norm(&grad) <= tol {
            break;
        }
        vector::axpy(-step, &grad, &mut x);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_of_dependent_vectors() {
        let v = vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert_eq!(span_dimension(&v, 1e-10), 2);
        assert_eq!(span_dimension(&[vec![0.0; 3]], 1e-10), 0);
    }
}
