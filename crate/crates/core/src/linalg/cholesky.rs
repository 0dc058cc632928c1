use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Lower-triangular Cholesky factor `L` with `S = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix. Only the lower triangle is read.
    pub fn new(s: &Matrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::NotSquare {
                context: "Cholesky::new",
                rows: s.rows(),
                cols: s.cols(),
            });
        }
        let n = s.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = s.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > 0.0) {
                return Err(Error::Contract(format!(
                    "matrix is not positive definite (pivot {j} = {d:.3e})"
                )));
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in (j + 1)..n {
                let mut v = s.get(i, j);
                for k in 0..j {
                    v -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, v / d);
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "Cholesky::solve: dimension mismatch");
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l.get(i, k) * y[k];
            }
            y[i] = v / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.l.get(k, i) * y[k];
            }
            y[i] = v / self.l.get(i, i);
        }
        y
    }
}

/// Solves `(I + γA) x = rhs` for symmetric positive semidefinite `A`.
///
/// Rejects `A` whose asymmetry exceeds `1e-12 · ‖A‖_max`.
pub fn solve_shifted_spd(a: &Matrix, gamma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            context: "solve_shifted_spd",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    crate::error::check_dim("solve_shifted_spd", a.rows(), rhs.len())?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "solve_shifted_spd: gamma must be positive, got {gamma}"
        )));
    }
    if a.asymmetry() > 1e-12 * a.max_abs() {
        return Err(Error::Contract("A not symmetric".into()));
    }
    let shifted = a.scale(gamma).add_identity(1.0);
    Ok(Cholesky::new(&shifted)?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    #[test]
    fn shifted_solve_examples() {
        let x = solve_shifted_spd(&Matrix::identity(2), 1.0, &[2.0, 4.0]).unwrap();
        assert!(vector::max_abs_diff(&x, &[1.0, 2.0]) < 1e-15);
        assert_eq!(
            solve_shifted_spd(&Matrix::zeros(3, 3), 7.0, &[1.0, -2.0, 3.0]).unwrap(),
            vec![1.0, -2.0, 3.0]
        );
        let x = solve_shifted_spd(&Matrix::diag(&[1.0, 3.0]), 2.0, &[3.0, 7.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(
            solve_shifted_spd(&a, 1.0, &[1.0, 1.0]),
            Err(Error::Contract("A not symmetric".into()))
        );
    }

    #[test]
    fn rejects_bad_gamma() {
        assert!(solve_shifted_spd(&Matrix::identity(2), 0.0, &[1.0, 1.0]).is_err());
        assert!(solve_shifted_spd(&Matrix::identity(2), -1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(Cholesky::new(&Matrix::diag(&[1.0, -1.0])).is_err());
    }
}
