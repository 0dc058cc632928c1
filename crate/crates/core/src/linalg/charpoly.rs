use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Largest dimension accepted by [`char_poly`]; beyond it the coefficients of
/// generic matrices leave the double range.
pub const CHAR_POLY_MAX_DIM: usize = 64;

/// Polynomial coefficients `c_0, …, c_n` of `P(λ) = Σ c_i λ^i`, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs(pub Vec<f64>);

impl PolyCoeffs {
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// Scalar evaluation by Horner's rule.
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Matrix evaluation `P(A) = Σ c_i A^i` by Horner's rule.
    pub fn eval_matrix(&self, a: &Matrix) -> Result<Matrix> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                context: "PolyCoeffs::eval_matrix",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut acc = Matrix::zeros(n, n);
        for &c in self.0.iter().rev() {
            acc = acc.matmul(a).add_identity(c);
        }
        Ok(acc)
    }
}

/// Monic characteristic polynomial `det(λI − A)` by the Faddeev–LeVerrier recurrence.
///
/// With `M_0 = 0` and `c_n = 1`, for `k = 1..n`:
/// `M_k = A·M_{k−1} + c_{n−k+1}·I` and `c_{n−k} = −tr(A·M_k)/k`.
pub fn char_poly(a: &Matrix) -> Result<PolyCoeffs> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            context: "char_poly",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n > CHAR_POLY_MAX_DIM {
        return Err(Error::UnsupportedSize {
            context: "char_poly",
            n,
            max: CHAR_POLY_MAX_DIM,
        });
    }
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = Matrix::zeros(n, n);
    for k in 1..=n {
        m = a.matmul(&m).add_identity(coeffs[n - k + 1]);
        let am = a.matmul(&m);
        coeffs[n - k] = -am.trace() / k as f64;
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("char_poly"));
    }
    Ok(PolyCoeffs(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_one_two() {
        let p = char_poly(&Matrix::diag(&[1.0, 2.0])).unwrap();
        assert_eq!(p.coeffs(), &[2.0, -3.0, 1.0]);
    }

    #[test]
    fn zero_matrix() {
        let p = char_poly(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn identity_three() {
        let p = char_poly(&Matrix::identity(3)).unwrap();
        assert_eq!(p.coeffs(), &[-1.0, 3.0, -3.0, 1.0]);
    }

    #[test]
    fn roots_of_triangular_matrix() {
        let a = Matrix::from_rows(&[
            vec![2.0, 5.0, -1.0],
            vec![0.0, -1.0, 3.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let p = char_poly(&a).unwrap();
        for lambda in [2.0, -1.0, 0.5] {
            assert!(p.eval(lambda).abs() < 1e-12);
        }
        assert!(p.eval_matrix(&a).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_and_rectangular() {
        assert!(matches!(
            char_poly(&Matrix::zeros(65, 65)),
            Err(Error::UnsupportedSize { .. })
        ));
        assert!(matches!(
            char_poly(&Matrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }
}
