//! Controlled proximity operator and the implicit-Euler controlled resolvent.
//!
//! `c-prox_{γf}(z) = argmin_x f(x) + ‖x − z‖²/(2γ) − ⟨Bu, x⟩`, with the
//! control term scaled so that the optimality condition reads
//! `(I + γA)x = z + γBu − γb`. The resolvent step
//! `(I + γ∇f)^{−1}(x_k + γBu_k)` solves the same system with `z = x_k`.

use serde::Serialize;

use crate::controllability::ControlSystem;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, vector, Matrix};
use crate::quadratic::QuadraticProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxQuery {
    pub problem: QuadraticProblem,
    pub input: Matrix,
    pub u: Vec<f64>,
    pub gamma: f64,
    pub z: Vec<f64>,
}

impl ProxQuery {
    pub fn validate(&self) -> Result<()> {
        let n = self.problem.dim();
        check_gamma(self.gamma)?;
        check_dim("ProxQuery (rows of B)", n, self.input.rows())?;
        check_dim("ProxQuery (u)", self.input.cols(), self.u.len())?;
        check_dim("ProxQuery (z)", n, self.z.len())
    }

    /// Value of the prox objective `f(x) + ‖x − z‖²/(2γ) − ⟨Bu, x⟩`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let bu = self.input.mul_vec(&self.u);
        let d = vector::sub(x, &self.z);
        self.problem.eval_unchecked(x) + vector::dot(&d, &d) / (2.0 * self.gamma)
            - vector::dot(&bu, x)
    }

    /// Gradient of the γ-scaled prox objective, `γ(Ax + b) + (x − z) − γBu`.
    pub fn optimality_residual(&self, x: &[f64]) -> Vec<f64> {
        let g = self.problem.gradient_unchecked(x);
        let bu = self.input.mul_vec(&self.u);
        (0..x.len())
            .map(|i| self.gamma * g[i] + (x[i] - self.z[i]) - self.gamma * bu[i])
            .collect()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "gamma must be positive and finite, got {gamma}"
        )))
    }
}

/// Closed-form controlled prox: solves `(I + γA)x = z + γBu − γb`.
pub fn controlled_prox(q: &ProxQuery) -> Result<Vec<f64>> {
    q.validate()?;
    let bu = q.input.mul_vec(&q.u);
    let b = q.problem.b();
    let rhs: Vec<f64> = (0..q.z.len())
        .map(|i| q.z[i] + q.gamma * bu[i] - q.gamma * b[i])
        .collect();
    linalg::solve_shifted_spd(q.problem.a(), q.gamma, &rhs)
}

/// Implicit-Euler step: `ψ = x_k + γBu_k`, then `(I + γA)x = ψ − γb`.
pub fn resolvent_step(sys: &ControlSystem, x: &[f64], u: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    check_dim("resolvent_step (x)", sys.state_dim(), x.len())?;
    check_dim("resolvent_step (u)", sys.control_dim(), u.len())?;
    let bu = sys.input().mul_vec(u);
    let b = sys.problem().b();
    let rhs: Vec<f64> = (0..x.len())
        .map(|i| {
            let psi = x[i] + gamma * bu[i];
            psi - gamma * b[i]
        })
        .collect();
    linalg::solve_shifted_spd(sys.a(), gamma, &rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxComparison {
    pub prox: Vec<f64>,
    pub resolvent: Vec<f64>,
    pub max_abs_diff: f64,
    /// `1e-10·(1 + ‖z‖)`
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// Evaluates the prox and the resolvent at the same point and compares them.
pub fn prox_resolvent_equivalence(q: &ProxQuery) -> Result<ProxComparison> {
    let prox = controlled_prox(q)?;
    let sys = ControlSystem::new(q.problem.clone(), q.input.clone())?;
    let resolvent = resolvent_step(&sys, &q.z, &q.u, q.gamma)?;
    let max_abs_diff = vector::max_abs_diff(&prox, &resolvent);
    let tolerance = 1e-10 * (1.0 + vector::norm(&q.z));
    Ok(ProxComparison {
        prox,
        resolvent,
        max_abs_diff,
        tolerance,
        within_tolerance: max_abs_diff <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(a: Matrix, b: Vec<f64>, input: Matrix, u: Vec<f64>, gamma: f64, z: Vec<f64>) -> ProxQuery {
        ProxQuery {
            problem: QuadraticProblem::new(a, b, 0.0).unwrap(),
            input,
            u,
            gamma,
            z,
        }
    }

    #[test]
    fn identity_hessian_halves() {
        let q = query(Matrix::identity(2), vec![0.0; 2], Matrix::identity(2), vec![0.0; 2], 1.0, vec![2.0, -4.0]);
        let x = controlled_prox(&q).unwrap();
        assert!(vector::max_abs_diff(&x, &[1.0, -2.0]) < 1e-15);
        let cmp = prox_resolvent_equivalence(&q).unwrap();
        assert!(vector::max_abs_diff(&cmp.resolvent, &[1.0, -2.0]) < 1e-15);
        assert!(cmp.within_tolerance);
    }

    #[test]
    fn flat_objective_shifts_by_control() {
        let q = query(
            Matrix::zeros(2, 2),
            vec![0.0; 2],
            Matrix::column(&[1.0, 2.0]),
            vec![3.0],
            0.5,
            vec![1.0, 1.0],
        );
        assert_eq!(controlled_prox(&q).unwrap(), vec![2.5, 4.0]);
    }

    #[test]
    fn unit_step_matches_closed_form() {
        // γ = 1: x* = (A + I)^{-1}(z + Bu − b)
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let q = query(a, vec![1.0, 0.0], Matrix::identity(2), vec![1.0, 1.0], 1.0, vec![0.0, 3.0]);
        // (A + I) = [[3,1],[1,3]], rhs = (0, 4) → x = (−0.5, 1.5)
        let x = controlled_prox(&q).unwrap();
        assert!(vector::max_abs_diff(&x, &[-0.5, 1.5]) < 1e-14);
        assert!(vector::norm(&q.optimality_residual(&x)) < 1e-14);
    }

    #[test]
    fn rejects_bad_gamma() {
        let mut q = query(Matrix::identity(1), vec![0.0], Matrix::identity(1), vec![0.0], 0.0, vec![1.0]);
        assert!(matches!(controlled_prox(&q), Err(Error::InvalidParameter(_))));
        q.gamma = -1.0;
        assert!(prox_resolvent_equivalence(&q).is_err());
    }

    #[test]
    fn critical_point_is_resolvent_fixed_point() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = QuadraticProblem::new(a, vec![1.0, -1.0], 0.0).unwrap();
        let sys = ControlSystem::new(p, Matrix::identity(2)).unwrap();
        let x = sys.problem().solve_critical().unwrap();
        let next = resolvent_step(&sys, &x, &[0.0, 0.0], 3.0).unwrap();
        assert!(vector::max_abs_diff(&next, &x) < 1e-14);
    }
}
