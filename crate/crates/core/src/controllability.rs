//! Controlled gradient flow systems `ẋ = −Ax + Bu − b` and the Kalman
//! (Pontryagin–Kalman) rank test.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, vector, Matrix};
use crate::quadratic::QuadraticProblem;
use crate::rng;

/// A quadratic problem together with an input matrix `B` (n × m).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSystem {
    problem: QuadraticProblem,
    input: Matrix,
}

impl ControlSystem {
    pub fn new(problem: QuadraticProblem, input: Matrix) -> Result<Self> {
        check_dim("ControlSystem::new (rows of B)", problem.dim(), input.rows())?;
        if !input.is_finite() {
            return Err(Error::NonFinite("ControlSystem::new"));
        }
        Ok(Self { problem, input })
    }

    pub fn problem(&self) -> &QuadraticProblem {
        &self.problem
    }

    pub fn a(&self) -> &Matrix {
        self.problem.a()
    }

    /// Input matrix `B`.
    pub fn input(&self) -> &Matrix {
        &self.input
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.problem.dim()
    }

    /// Control dimension m.
    pub fn control_dim(&self) -> usize {
        self.input.cols()
    }

    /// Right-hand side `−Ax + Bu − b` of the flow.
    pub(crate) fn vector_field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let ax = self.a().mul_vec(x);
        let bu = self.input.mul_vec(u);
        ax.iter()
            .zip(&bu)
            .zip(self.problem.b())
            .map(|((a, b_u), b)| -a + b_u - b)
            .collect()
    }

    /// Time derivative of `f` along the flow: `−‖Ax + b‖² + ⟨Ax + b, Bu⟩`.
    pub fn value_derivative(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        check_dim("value_derivative (x)", self.state_dim(), x.len())?;
        check_dim("value_derivative (u)", self.control_dim(), u.len())?;
        let g = self.problem.gradient_unchecked(x);
        let bu = self.input.mul_vec(u);
        Ok(-vector::dot(&g, &g) + vector::dot(&g, &bu))
    }
}

/// Outcome of the Kalman rank test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllabilityReport {
    pub kalman: Matrix,
    pub rank: usize,
    pub controllable: bool,
    pub tol_used: f64,
}

/// Kalman matrix `[B | (−A)B | … | (−A)^{n−1}B]`.
///
/// Block `i` occupies columns `i·m .. (i+1)·m` and is obtained from block
/// `i − 1` by one multiplication with `−A`.
pub fn kalman_matrix(sys: &ControlSystem) -> Matrix {
    krylov_blocks(&sys.a().scale(-1.0), sys.input())
}

fn krylov_blocks(op: &Matrix, first: &Matrix) -> Matrix {
    let n = op.rows();
    let mut blocks = Vec::with_capacity(n);
    let mut block = first.clone();
    for i in 0..n {
        if i > 0 {
            block = op.matmul(&block);
        }
        blocks.push(block.clone());
    }
    Matrix::hcat(&blocks)
}

/// Default relative tolerance used for Kalman matrices of `sys`.
pub fn default_tol(sys: &ControlSystem) -> f64 {
    let n = sys.state_dim();
    linalg::default_rank_tol(n, n * sys.control_dim())
}

/// Rank test `rank(𝒞) = n` with relative singular-value tolerance `tol_rel`.
pub fn is_controllable(sys: &ControlSystem, tol_rel: f64) -> Result<ControllabilityReport> {
    let kalman = kalman_matrix(sys);
    let rank = linalg::numerical_rank(&kalman, tol_rel)?;
    Ok(ControllabilityReport {
        controllable: rank == sys.state_dim(),
        kalman,
        rank,
        tol_used: tol_rel,
    })
}

/// Controllability of the controlled Newton flow `Aẋ = −Ax − b + Bu`, which
/// after `z = Ax` reduces to `ż = −z − b + Bu` and holds iff `rank(B) = n`.
pub fn newton_controllable(input: &Matrix) -> Result<bool> {
    let n = input.rows();
    let tol = linalg::default_rank_tol(n, input.cols());
    Ok(linalg::numerical_rank(input, tol)? == n)
}

/// Rank bracket check for Gaussian sensing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GaussianRankCheck {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub rank: usize,
    /// `d ≤ rank`
    pub lower_ok: bool,
    /// `rank ≤ min(n, n·d)`
    pub upper_ok: bool,
}

/// Draws `A = GᵀG/m` (G: m × n standard Gaussian) and `B` (n × d standard
/// Gaussian) and checks `d ≤ rank(𝒞) ≤ min(n, n·d)`.
///
/// Stream layout: `G` row-major, then `B` row-major, from `seeded_rng(seed)`.
pub fn gaussian_rank_check(n: usize, m: usize, d: usize, seed: u64) -> Result<GaussianRankCheck> {
    if n == 0 || m == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "gaussian_rank_check: n, m, d must be positive (got {n}, {m}, {d})"
        )));
    }
    let mut stream = rng::seeded_rng(seed);
    let a = gaussian_sensing_hessian(&mut stream, n, m);
    let b = rng::gaussian_matrix(&mut stream, n, d);
    rank_bracket(a, b, m)
}

/// Same check with a caller-supplied input matrix (n × d) in place of the Gaussian draw.
pub fn gaussian_rank_check_with_input(
    n: usize,
    m: usize,
    seed: u64,
    input: &Matrix,
) -> Result<GaussianRankCheck> {
    check_dim("gaussian_rank_check_with_input", n, input.rows())?;
    let mut stream = rng::seeded_rng(seed);
    let a = gaussian_sensing_hessian(&mut stream, n, m);
    rank_bracket(a, input.clone(), m)
}

pub(crate) fn gaussian_sensing_hessian(stream: &mut rng::StreamRng, n: usize, m: usize) -> Matrix {
    rng::gaussian_matrix(stream, m, n).gram().scale(1.0 / m as f64)
}

fn rank_bracket(a: Matrix, b: Matrix, m: usize) -> Result<GaussianRankCheck> {
    let n = a.rows();
    let d = b.cols();
    let problem = QuadraticProblem::new(a, vec![0.0; n], 0.0)?;
    let sys = ControlSystem::new(problem, b)?;
    let report = is_controllable(&sys, default_tol(&sys))?;
    let rank = report.rank;
    Ok(GaussianRankCheck {
        n,
        m,
        d,
        rank,
        lower_ok: d <= rank,
        upper_ok: rank <= n.min(n * d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(a: Matrix, b: Matrix) -> ControlSystem {
        let n = a.rows();
        ControlSystem::new(QuadraticProblem::new(a, vec![0.0; n], 0.0).unwrap(), b).unwrap()
    }

    #[test]
    fn kalman_examples() {
        let sys = system(Matrix::diag(&[1.0, 2.0]), Matrix::column(&[1.0, 1.0]));
        let k = kalman_matrix(&sys);
        assert_eq!(k.to_rows(), vec![vec![1.0, -1.0], vec![1.0, -2.0]]);

        let sys = system(Matrix::identity(2), Matrix::column(&[1.0, 0.0]));
        assert_eq!(kalman_matrix(&sys).to_rows(), vec![vec![1.0, -1.0], vec![0.0, 0.0]]);

        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let sys = system(Matrix::zeros(3, 3), b.clone());
        let k = kalman_matrix(&sys);
        assert_eq!(k.col_block(0, 2), b);
        assert_eq!(k.col_block(2, 4).max_abs(), 0.0);
    }

    #[test]
    fn controllability_examples() {
        let sys = system(Matrix::diag(&[1.0, 2.0]), Matrix::column(&[1.0, 1.0]));
        let r = is_controllable(&sys, default_tol(&sys)).unwrap();
        assert!(r.controllable);
        assert_eq!(r.rank, 2);

        let sys = system(Matrix::identity(2), Matrix::column(&[1.0, 0.0]));
        let r = is_controllable(&sys, default_tol(&sys)).unwrap();
        assert!(!r.controllable);
        assert_eq!(r.rank, 1);

        let a = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 0.0]])
            .unwrap();
        let sys = system(a, Matrix::identity(3));
        assert!(is_controllable(&sys, 1e-12).unwrap().controllable);
    }

    #[test]
    fn newton_examples() {
        assert!(newton_controllable(&Matrix::identity(4)).unwrap());
        assert!(!newton_controllable(&Matrix::zeros(3, 2)).unwrap());
        let tall = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(!newton_controllable(&tall).unwrap());
        let dup = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(!newton_controllable(&dup).unwrap());
    }

    #[test]
    fn gaussian_check_examples() {
        let r = gaussian_rank_check(32, 64, 2, 1).unwrap();
        assert!(r.lower_ok && r.upper_ok, "{r:?}");

        let r = gaussian_rank_check(6, 12, 6, 3).unwrap();
        assert_eq!(r.rank, 6);

        let r = gaussian_rank_check_with_input(8, 16, 5, &Matrix::zeros(8, 1)).unwrap();
        assert_eq!(r.rank, 0);
        assert!(!r.lower_ok);
        assert!(r.upper_ok);
    }

    #[test]
    fn value_derivative_examples() {
        let p = QuadraticProblem::new(Matrix::diag(&[1.0, 3.0]), vec![1.0, -1.0], 0.0).unwrap();
        let sys = ControlSystem::new(p, Matrix::identity(2)).unwrap();
        let x = [0.5, 2.0];
        let g = sys.problem().gradient(&x).unwrap();
        let vd = sys.value_derivative(&x, &[0.0, 0.0]).unwrap();
        assert_eq!(vd, -vector::dot(&g, &g));
        let crit = sys.problem().solve_critical().unwrap();
        assert!(sys.value_derivative(&crit, &[4.0, -7.0]).unwrap().abs() < 1e-14);
    }
}
