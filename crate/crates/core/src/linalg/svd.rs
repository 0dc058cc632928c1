//! One-sided (Hestenes) Jacobi singular value decomposition and the
//! rank / least-squares routines built on top of it.

use crate::error::{Error, Result};
use crate::linalg::{vector, Matrix};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U·diag(s)·Vᵀ` with `k = min(rows, cols)` singular triplets,
/// singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows × k, orthonormal columns for the nonzero singular values
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    /// cols × k
    pub v: Matrix,
}

/// Default relative rank tolerance `max(rows, cols) · ε · 1e3`.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols).max(1) as f64 * f64::EPSILON * 1e3
}

impl Svd {
    pub fn new(m: &Matrix) -> Result<Svd> {
        if !m.is_finite() {
            return Err(Error::NonFinite("Svd::new"));
        }
        // Work on a unit-max-entry copy so that squared column norms stay finite.
        let scale = m.max_abs();
        let unit = if scale >= f64::MIN_POSITIVE { m.scale(1.0 / scale) } else { m.clone() };
        let (u, mut singular_values, v) = if unit.rows() >= unit.cols() {
            jacobi_tall(&unit)
        } else {
            let (v, s, u) = jacobi_tall(&unit.transpose());
            (u, s, v)
        };
        if scale >= f64::MIN_POSITIVE {
            singular_values.iter_mut().for_each(|s| *s *= scale);
        }
        Ok(Svd {
            u,
            singular_values,
            v,
        })
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values strictly above `tol_rel · σ_max`.
    pub fn rank(&self, tol_rel: f64) -> usize {
        let smax = self.max_singular_value();
        if smax == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > tol_rel * smax)
            .count()
    }

    /// Minimum-norm least-squares solution `V·Σ⁺·Uᵀ·rhs`, truncating singular
    /// values at or below `tol_rel · σ_max`.
    pub fn solve(&self, rhs: &[f64], tol_rel: f64) -> Vec<f64> {
        let smax = self.max_singular_value();
        let mut x = vec![0.0; self.v.rows()];
        for (k, &s) in self.singular_values.iter().enumerate() {
            if smax == 0.0 || s <= tol_rel * smax {
                break;
            }
            let coef = (0..self.u.rows())
                .map(|i| self.u.get(i, k) * rhs[i])
                .sum::<f64>()
                / s;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.v.get(i, k);
            }
        }
        x
    }

    /// Moore–Penrose pseudo-inverse (cols × rows).
    pub fn pseudo_inverse(&self, tol_rel: f64) -> Matrix {
        let smax = self.max_singular_value();
        let (r, c) = (self.u.rows(), self.v.rows());
        let mut out = Matrix::zeros(c, r);
        for (k, &s) in self.singular_values.iter().enumerate() {
            if smax == 0.0 || s <= tol_rel * smax {
                break;
            }
            for i in 0..c {
                let vik = self.v.get(i, k) / s;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..r {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + vik * self.u.get(j, k));
                }
            }
        }
        out
    }
}

/// Jacobi SVD of a matrix with `rows ≥ cols`; returns `(U, s, V)` sorted.
fn jacobi_tall(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let rows = m.rows();
    let cols = m.cols();
    let mut work: Vec<Vec<f64>> = (0..cols).map(|j| m.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();
    let eps = f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = vector::dot(&work[p], &work[p]);
                let beta = vector::dot(&work[q], &work[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = vector::dot(&work[p], &work[q]);
                if gamma.abs() <= eps * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut work, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = work
        .iter()
        .enumerate()
        .map(|(j, col)| (vector::norm(col), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut u = Matrix::zeros(rows, cols);
    let mut vm = Matrix::zeros(cols, cols);
    let mut s = Vec::with_capacity(cols);
    for (k, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        if sigma > 0.0 {
            for i in 0..rows {
                u.set(i, k, work[j][i] / sigma);
            }
        }
        for i in 0..cols {
            vm.set(i, k, v[j][i]);
        }
    }
    (u, s, vm)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(Svd::new(m)?.singular_values)
}

/// Number of singular values greater than `tol_rel · σ_max`; zero for the zero matrix.
pub fn numerical_rank(m: &Matrix, tol_rel: f64) -> Result<usize> {
    if !(tol_rel > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "numerical_rank: tol_rel must be positive, got {tol_rel}"
        )));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0);
    }
    Ok(Svd::new(m)?.rank(tol_rel))
}

/// Minimum-Euclidean-norm minimiser of `‖M x − rhs‖` via the SVD pseudo-inverse,
/// using the default relative rank tolerance.
pub fn min_norm_least_squares(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_dim("min_norm_least_squares", m.rows(), rhs.len())?;
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(vec![0.0; m.cols()]);
    }
    let svd = Svd::new(m)?;
    Ok(svd.solve(rhs, default_rank_tol(m.rows(), m.cols())))
}

/// Moore–Penrose pseudo-inverse with the default relative rank tolerance.
pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(Matrix::zeros(m.cols(), m.rows()));
    }
    let svd = Svd::new(m)?;
    Ok(svd.pseudo_inverse(default_rank_tol(m.rows(), m.cols())))
}
