//! Independent reference computations and instance generators shared by the
//! integration tests. Nothing here calls the numerical routines under test.

#![allow(dead_code)]

use ctrlgrad::rng::{self, StreamRng};
use ctrlgrad::Matrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Naive triple-loop product.
pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

pub fn naive_mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|k| a.get(i, k) * v[k]).sum())
        .collect()
}

/// Orthonormal basis of `span(vectors)` by twice-iterated classical
/// Gram–Schmidt; vectors with residual below `tol_rel · max‖v‖` are dropped.
pub fn orthonormal_basis(vectors: &[Vec<f64>], tol_rel: f64) -> Vec<Vec<f64>> {
    let scale = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
            }
        }
        let nr = norm(&r);
        if nr > tol_rel * scale {
            basis.push(r.iter().map(|x| x / nr).collect());
        }
    }
    basis
}

pub fn span_dimension(vectors: &[Vec<f64>], tol_rel: f64) -> usize {
    orthonormal_basis(vectors, tol_rel).len()
}

/// `{(−A)^i B e_j}` for `i < n`.
pub fn krylov_vectors(a: &Matrix, b: &Matrix) -> Vec<Vec<f64>> {
    let n = a.rows();
    let mut out = Vec::new();
    for j in 0..b.cols() {
        let mut v = b.col(j);
        for _ in 0..n {
            out.push(v.clone());
            v = naive_mat_vec(a, &v).iter().map(|x| -x).collect();
        }
    }
    out
}

/// Projection of `v` onto the orthogonal complement of `span(basis)` (orthonormal basis).
pub fn project_out(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for q in basis {
        let c = dot(q, &r);
        r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
    }
    r
}

/// Plain gradient descent on `½xᵀAx + bᵀx`.
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

/// Gradient descent on `½xᵀHx − gᵀx` with step `1/L` until `‖Hx − g‖ ≤ tol`.
pub fn gd_minimise(h: &Matrix, g: &[f64], lipschitz: f64, tol: f64) -> Vec<f64> {
    let mut x = vec![0.0; g.len()];
    for _ in 0..5_000_000 {
        let r: Vec<f64> = naive_mat_vec(h, &x).iter().zip(g).map(|(a, b)| a - b).collect();
        if norm(&r) <= tol {
            return x;
        }
        x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi -= ri / lipschitz);
    }
    panic!("gd_minimise did not reach tolerance {tol}");
}

/// Gershgorin bound on the largest eigenvalue magnitude of a symmetric matrix.
pub fn gershgorin(h: &Matrix) -> f64 {
    (0..h.rows())
        .map(|i| (0..h.cols()).map(|j| h.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Random orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(r: &mut StreamRng, n: usize) -> Matrix {
    loop {
        let cols: Vec<Vec<f64>> = (0..n).map(|_| rng::gaussian_vec(r, n)).collect();
        let q = orthonormal_basis(&cols, 1e-8);
        if q.len() == n {
            return Matrix::from_fn(n, n, |i, j| q[j][i]);
        }
    }
}

/// `Q diag(λ) Qᵀ`, symmetrised exactly.
pub fn symmetric_from_spectrum(q: &Matrix, lambdas: &[f64]) -> Matrix {
    let n = lambdas.len();
    let mut a = Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| q.get(i, k) * lambdas[k] * q.get(j, k)).sum()
    });
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, avg);
            a.set(j, i, avg);
        }
    }
    a
}

/// Random PSD matrix `GᵀG` with `G` of size `rank × n`.
pub fn random_psd(r: &mut StreamRng, n: usize, rank: usize) -> Matrix {
    let g = rng::gaussian_matrix(r, rank, n);
    Matrix::from_fn(n, n, |i, j| (0..rank).map(|k| g.get(k, i) * g.get(k, j)).sum())
}

/// Lower bound on `‖M‖₂` from the best of `samples` random unit vectors.
pub fn brute_force_norm(r: &mut StreamRng, m: &Matrix, samples: usize) -> f64 {
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let v = rng::gaussian_vec(r, m.cols());
        let nv = norm(&v);
        best = best.max(norm(&naive_mat_vec(m, &v)) / nv);
    }
    best
}
