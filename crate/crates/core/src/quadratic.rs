//! Quadratic objectives `f(x) = ½⟨x, Ax⟩ + ⟨b, x⟩ + c` with symmetric
//! positive semidefinite `A`.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, vector, Matrix};

/// Quadratic objective with validated symmetric PSD Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    a: Matrix,
    b: Vec<f64>,
    c: f64,
}

impl QuadraticProblem {
    /// Validates and builds a problem.
    ///
    /// `A` must be square, symmetric within `1e-12·(1 + ‖A‖_max)` and positive
    /// semidefinite within `−1e-8·‖A‖₂` according to a shifted power-iteration
    /// estimate of its smallest eigenvalue.
    pub fn new(a: Matrix, b: Vec<f64>, c: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                context: "QuadraticProblem::new",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        check_dim("QuadraticProblem::new (b)", a.rows(), b.len())?;
        if !vector::all_finite(&b) || !c.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite("QuadraticProblem::new"));
        }
        if a.asymmetry() > 1e-12 * (1.0 + a.max_abs()) {
            return Err(Error::Contract("A not symmetric".into()));
        }
        let norm = linalg::spectral_norm(&a);
        let lambda_min = linalg::smallest_eigenvalue_estimate(&a);
        if lambda_min < -1e-8 * norm {
            return Err(Error::Contract(format!(
                "A not positive semidefinite (smallest eigenvalue estimate {lambda_min:.3e})"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Least-squares objective `½‖Mx − y‖²`: `A = MᵀM`, `b = −Mᵀy`, `c = ½‖y‖²`.
    ///
    /// The constant is `½‖y‖²` so that [`eval`](Self::eval) equals `½‖Mx − y‖²`
    /// exactly. Writing the expansion with `c = ‖y‖²` shifts every reported
    /// f-value by `½‖y‖²` and leaves iterates unchanged.
    pub fn from_least_squares(m: &Matrix, y: &[f64]) -> Result<Self> {
        check_dim("from_least_squares", m.rows(), y.len())?;
        let a = m.gram();
        let b = vector::scale(&m.tr_mul_vec(y), -1.0);
        let c = 0.5 * vector::dot(y, y);
        Self::new(a, b, c)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `½xᵀAx + bᵀx + c`
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim("QuadraticProblem::eval", self.dim(), x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x);
        0.5 * vector::dot(x, &ax) + vector::dot(&self.b, x) + self.c
    }

    /// `∇f(x) = Ax + b`
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("QuadraticProblem::gradient", self.dim(), x.len())?;
        Ok(self.gradient_unchecked(x))
    }

    pub(crate) fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_vec(x);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi += bi;
        }
        g
    }

    /// Minimum-norm critical point, i.e. minimum-norm solution of `Ax = −b`.
    ///
    /// Fails with [`Error::NoCriticalPoint`] when `‖Ax̂ + b‖ > 1e-8·(1 + ‖b‖)`.
    pub fn solve_critical(&self) -> Result<Vec<f64>> {
        let neg_b = vector::scale(&self.b, -1.0);
        let x = linalg::min_norm_least_squares(&self.a, &neg_b)?;
        let residual = vector::norm(&self.gradient_unchecked(&x));
        if residual > 1e-8 * (1.0 + vector::norm(&self.b)) {
            return Err(Error::NoCriticalPoint { residual });
        }
        Ok(x)
    }
}
