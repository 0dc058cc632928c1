//! Controlled gradient descent, feedback design and rate certificates.
//!
//! Two couplings of the control are supported:
//!
//! * [`Coupling::Paper`]: `x_{k+1} = x_k − γ(Ax_k + b) + Bu_k`
//! * [`Coupling::Euler`]: `x_{k+1} = x_k − γ(Ax_k + b) + γBu_k`, the explicit
//!   Euler step of the controlled flow (default).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controllability::ControlSystem;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, vector, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Paper,
    #[default]
    Euler,
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "euler" => Ok(Self::Euler),
            other => Err(Error::InvalidParameter(format!("unknown coupling '{other}'"))),
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Euler => "euler",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop once `‖∇f(x_k)‖ ≤ stop_tol`.
    pub stop_tol: f64,
    pub coupling: Coupling,
}

impl DescentConfig {
    pub fn new(gamma: f64, max_iters: usize, stop_tol: f64, coupling: Coupling) -> Result<Self> {
        let cfg = Self {
            gamma,
            max_iters,
            stop_tol,
            coupling,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `γ = 1/(2L)` with `L = ‖A‖₂` (γ = 1 when `A = 0`).
    pub fn default_gamma(sys: &ControlSystem) -> f64 {
        let l = linalg::spectral_norm(sys.a());
        if l > 0.0 {
            0.5 / l
        } else {
            1.0
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be ≥ 1".into()));
        }
        if self.stop_tol.is_nan() {
            return Err(Error::InvalidParameter("stop_tol is NaN".into()));
        }
        Ok(())
    }
}

/// Rule producing `u_k` at each iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlPolicy {
    Zero,
    Constant(Vec<f64>),
    /// `u_k = K x_k`
    StateFeedback(Matrix),
    /// `u_k = K (A x_k + b)`
    GradientFeedback(Matrix),
    /// `u_k = schedule[k]`
    Schedule(Vec<Vec<f64>>),
}

impl ControlPolicy {
    pub fn validate(&self, sys: &ControlSystem) -> Result<()> {
        let (n, m) = (sys.state_dim(), sys.control_dim());
        match self {
            Self::Zero => Ok(()),
            Self::Constant(u) => check_dim("ControlPolicy::Constant", m, u.len()),
            Self::StateFeedback(k) | Self::GradientFeedback(k) => {
                check_dim("ControlPolicy gain (rows)", m, k.rows())?;
                check_dim("ControlPolicy gain (cols)", n, k.cols())
            }
            Self::Schedule(s) => s
                .iter()
                .try_for_each(|u| check_dim("ControlPolicy::Schedule", m, u.len())),
        }
    }

    fn control(&self, k: usize, x: &[f64], grad: &[f64], m: usize) -> Result<Vec<f64>> {
        Ok(match self {
            Self::Zero => vec![0.0; m],
            Self::Constant(u) => u.clone(),
            Self::StateFeedback(gain) => gain.mul_vec(x),
            Self::GradientFeedback(gain) => gain.mul_vec(grad),
            Self::Schedule(s) => s
                .get(k)
                .cloned()
                .ok_or(Error::ScheduleExhausted { iter: k, len: s.len() })?,
        })
    }
}

/// One controlled descent step.
pub fn descent_step(sys: &ControlSystem, x: &[f64], u: &[f64], cfg: &DescentConfig) -> Result<Vec<f64>> {
    check_dim("descent_step (x)", sys.state_dim(), x.len())?;
    check_dim("descent_step (u)", sys.control_dim(), u.len())?;
    let grad = sys.problem().gradient_unchecked(x);
    Ok(step_with_gradient(sys, x, &grad, u, cfg))
}

fn step_with_gradient(
    sys: &ControlSystem,
    x: &[f64],
    grad: &[f64],
    u: &[f64],
    cfg: &DescentConfig,
) -> Vec<f64> {
    let mut next: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi - cfg.gamma * gi).collect();
    // A zero control leaves the classical step untouched, bit for bit.
    if u.iter().any(|&v| v != 0.0) {
        let bu = sys.input().mul_vec(u);
        let scale = match cfg.coupling {
            Coupling::Paper => 1.0,
            Coupling::Euler => cfg.gamma,
        };
        for (xi, bi) in next.iter_mut().zip(&bu) {
            *xi += scale * bi;
        }
    }
    next
}

/// Per-iteration metrics of a descent run.
///
/// Entry `k` describes `x_k`; `control_norms[k]` is the norm of the control
/// that produced `x_k` (zero for `k = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub f_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub dist_to_ref: Option<Vec<f64>>,
    pub control_norms: Vec<f64>,
    pub final_state: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.f_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_values.is_empty()
    }
}

/// Runs controlled descent from `x0` for at most `cfg.max_iters` steps.
pub fn run_descent(
    sys: &ControlSystem,
    policy: &ControlPolicy,
    x0: &[f64],
    cfg: &DescentConfig,
    reference: Option<&[f64]>,
) -> Result<RunRecord> {
    cfg.validate()?;
    policy.validate(sys)?;
    let n = sys.state_dim();
    check_dim("run_descent (x0)", n, x0.len())?;
    if let Some(r) = reference {
        check_dim("run_descent (reference)", n, r.len())?;
    }
    let m = sys.control_dim();
    let p = sys.problem();

    let mut f_values = Vec::new();
    let mut grad_norms = Vec::new();
    let mut dists = reference.map(|_| Vec::new());
    let mut control_norms = vec![0.0];

    let mut x = x0.to_vec();
    let mut k = 0;
    let converged = loop {
        let grad = p.gradient_unchecked(&x);
        let grad_norm = vector::norm(&grad);
        f_values.push(p.eval_unchecked(&x));
        grad_norms.push(grad_norm);
        if let (Some(d), Some(r)) = (dists.as_mut(), reference) {
            d.push(vector::dist(&x, r));
        }
        if grad_norm <= cfg.stop_tol {
            break true;
        }
        if k == cfg.max_iters {
            break false;
        }
        let u = policy.control(k, &x, &grad, m)?;
        control_norms.push(vector::norm(&u));
        x = step_with_gradient(sys, &x, &grad, &u, cfg);
        if !vector::all_finite(&x) {
            return Err(Error::NonFinite("run_descent (iterate diverged)"));
        }
        k += 1;
    };

    Ok(RunRecord {
        f_values,
        grad_norms,
        dist_to_ref: dists,
        control_norms,
        final_state: x,
        iterations_used: k,
        converged,
    })
}

/// `K = B⁺A`, the Frobenius-norm minimiser of `‖A − BK‖_F`; then
/// `A − BK = (I − BB⁺)A`.
pub fn design_feedback(sys: &ControlSystem) -> Result<Matrix> {
    Ok(linalg::pseudo_inverse(sys.input())?.matmul(sys.a()))
}

/// Gradient-feedback gain minimising the Frobenius norm of the error
/// propagator of `u_k = K(Ax_k + b)` under the given step and coupling.
///
/// Euler coupling propagates errors by `I − γA + γBKA`, paper coupling by
/// `I − γA + BKA`; the minimisers are `K = −B⁺(I − γA)(γA)⁺` and
/// `K = −B⁺(I − γA)A⁺`. For invertible `A` the euler propagator becomes
/// `(I − BB⁺)(I − γA)`.
pub fn design_gradient_feedback(sys: &ControlSystem, gamma: f64, coupling: Coupling) -> Result<Matrix> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let a = sys.a();
    let scaled = match coupling {
        Coupling::Euler => a.scale(gamma),
        Coupling::Paper => a.clone(),
    };
    let residual = Matrix::identity(a.rows()).sub(&a.scale(gamma));
    let b_pinv = linalg::pseudo_inverse(sys.input())?;
    Ok(b_pinv
        .matmul(&residual)
        .matmul(&linalg::pseudo_inverse(&scaled)?)
        .scale(-1.0))
}

/// Which quantity a feedback gain acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    State,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCertificate {
    /// `‖A − BK‖₂`
    pub tau: f64,
    /// Spectral norm of the linear error propagator of the iteration.
    pub contraction: f64,
    /// Minimum-norm fixed point, `None` if the fixed-point equation is inconsistent.
    pub fixed_point: Option<Vec<f64>>,
    /// Whether the fixed point is a critical point of `f`.
    pub preserves_argmin: bool,
}

/// Contraction certificate of feedback descent with gain `K`.
///
/// | kind     | coupling | propagator          | fixed points            |
/// |----------|----------|---------------------|-------------------------|
/// | state    | euler    | `I − γ(A − BK)`     | `γ(A − BK)x = −γb`      |
/// | state    | paper    | `I − γA + BK`       | `(γA − BK)x = −γb`      |
/// | gradient | euler    | `I − γ(I − BK)A`    | `(I − BK)(Ax + b) = 0`  |
/// | gradient | paper    | `I − (γI − BK)A`    | `(γI − BK)(Ax + b) = 0` |
pub fn rate_certificate(
    sys: &ControlSystem,
    gain: &Matrix,
    gamma: f64,
    kind: FeedbackKind,
    coupling: Coupling,
) -> Result<RateCertificate> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let (n, m) = (sys.state_dim(), sys.control_dim());
    check_dim("rate_certificate (gain rows)", m, gain.rows())?;
    check_dim("rate_certificate (gain cols)", n, gain.cols())?;
    let a = sys.a();
    let b = sys.problem().b();
    let bk = sys.input().matmul(gain);
    let eye = Matrix::identity(n);
    let tau = linalg::spectral_norm(&a.sub(&bk));

    let (system, rhs) = match (kind, coupling) {
        (FeedbackKind::State, Coupling::Euler) => {
            (a.sub(&bk).scale(gamma), vector::scale(b, -gamma))
        }
        (FeedbackKind::State, Coupling::Paper) => {
            (a.scale(gamma).sub(&bk), vector::scale(b, -gamma))
        }
        (FeedbackKind::Gradient, coupling) => {
            let left = match coupling {
                Coupling::Euler => eye.sub(&bk).scale(gamma),
                Coupling::Paper => eye.scale(gamma).sub(&bk),
            };
            let rhs = vector::scale(&left.mul_vec(b), -1.0);
            (left.matmul(a), rhs)
        }
    };
    let contraction = linalg::spectral_norm(&eye.sub(&system));

    let candidate = linalg::min_norm_least_squares(&system, &rhs)?;
    let residual = vector::dist(&system.mul_vec(&candidate), &rhs);
    let fixed_point = (residual <= 1e-8 * (1.0 + vector::norm(&rhs))).then_some(candidate);
    let preserves_argmin = fixed_point.as_ref().is_some_and(|x| {
        vector::norm(&sys.problem().gradient_unchecked(x)) <= 1e-8 * (1.0 + vector::norm(b))
    });
    Ok(RateCertificate {
        tau,
        contraction,
        fixed_point,
        preserves_argmin,
    })
}

/// Sequence `(1 − γτ)^k · dist0`, `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCurve {
    pub base: f64,
    pub values: Vec<f64>,
    /// Set when the base lies outside `(0, 1)`, where the sequence is not a
    /// decaying bound.
    pub degenerate_base: bool,
}

pub fn rate_bound_curve(tau: f64, gamma: f64, dist0: f64, k_max: usize) -> Result<BoundCurve> {
    if !(dist0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("dist0 must be ≥ 0, got {dist0}")));
    }
    let base = 1.0 - gamma * tau;
    let mut values = Vec::with_capacity(k_max + 1);
    let mut cur = dist0;
    for _ in 0..=k_max {
        values.push(cur);
        cur *= base;
    }
    Ok(BoundCurve {
        base,
        values,
        degenerate_base: !(base > 0.0 && base < 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::QuadraticProblem;

    fn system(a: Matrix, b: Vec<f64>, input: Matrix) -> ControlSystem {
        ControlSystem::new(QuadraticProblem::new(a, b, 0.0).unwrap(), input).unwrap()
    }

    fn cfg(gamma: f64, coupling: Coupling) -> DescentConfig {
        DescentConfig::new(gamma, 100, 0.0, coupling).unwrap()
    }

    #[test]
    fn step_examples() {
        let sys = system(Matrix::identity(2), vec![0.0; 2], Matrix::identity(2));
        let x = descent_step(&sys, &[2.0, 2.0], &[0.0, 0.0], &cfg(0.5, Coupling::Euler)).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);

        let sys = system(Matrix::zeros(2, 2), vec![0.0; 2], Matrix::identity(2));
        let x = descent_step(&sys, &[1.0, 1.0], &[2.0, -1.0], &cfg(0.25, Coupling::Paper)).unwrap();
        assert_eq!(x, vec![3.0, 0.0]);
        let x = descent_step(&sys, &[1.0, 1.0], &[2.0, -1.0], &cfg(0.25, Coupling::Euler)).unwrap();
        assert_eq!(x, vec![1.5, 0.75]);
        assert!(descent_step(&sys, &[1.0], &[0.0, 0.0], &cfg(0.25, Coupling::Euler)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DescentConfig::new(0.0, 1, 0.0, Coupling::Euler).is_err());
        assert!(DescentConfig::new(1.0, 0, 0.0, Coupling::Euler).is_err());
        assert_eq!("paper".parse::<Coupling>().unwrap(), Coupling::Paper);
        assert!("implicit".parse::<Coupling>().is_err());
    }

    #[test]
    fn zero_policy_gradient_norm_decreases() {
        let sys = system(Matrix::diag(&[4.0, 1.0, 0.25]), vec![1.0, -2.0, 0.5], Matrix::identity(3));
        let c = DescentConfig::new(0.25, 50, 0.0, Coupling::Euler).unwrap();
        let rec = run_descent(&sys, &ControlPolicy::Zero, &[3.0, 3.0, 3.0], &c, None).unwrap();
        assert_eq!(rec.len(), 51);
        for w in rec.grad_norms.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn zero_gain_matches_zero_policy() {
        let sys = system(Matrix::diag(&[2.0, 1.0]), vec![1.0, 1.0], Matrix::column(&[1.0, 1.0]));
        let c = cfg(0.3, Coupling::Euler);
        let a = run_descent(&sys, &ControlPolicy::Zero, &[1.0, -1.0], &c, None).unwrap();
        let b = run_descent(
            &sys,
            &ControlPolicy::GradientFeedback(Matrix::zeros(1, 2)),
            &[1.0, -1.0],
            &c,
            None,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn start_at_optimum_converges_immediately() {
        let sys = system(Matrix::diag(&[2.0, 1.0]), vec![-2.0, 3.0], Matrix::identity(2));
        let x0 = sys.problem().solve_critical().unwrap();
        let rec = run_descent(&sys, &ControlPolicy::Zero, &x0, &cfg(0.3, Coupling::Euler), None).unwrap();
        assert!(rec.converged);
        assert_eq!(rec.iterations_used, 0);
        assert_eq!(rec.len(), 1);
    }

    #[test]
    fn schedule_exhaustion() {
        let sys = system(Matrix::identity(1), vec![1.0], Matrix::identity(1));
        let c = DescentConfig::new(0.1, 5, 0.0, Coupling::Euler).unwrap();
        let policy = ControlPolicy::Schedule(vec![vec![1.0]; 3]);
        assert_eq!(
            run_descent(&sys, &policy, &[0.0], &c, None),
            Err(Error::ScheduleExhausted { iter: 3, len: 3 })
        );
        let c = DescentConfig::new(0.1, 3, 0.0, Coupling::Euler).unwrap();
        assert!(run_descent(&sys, &policy, &[0.0], &c, None).is_ok());
    }

    #[test]
    fn design_feedback_examples() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let sys = system(a.clone(), vec![0.0; 2], Matrix::identity(2));
        let k = design_feedback(&sys).unwrap();
        assert!(k.sub(&a).max_abs() < 1e-12);

        let sys = system(Matrix::diag(&[1.0, 2.0]), vec![0.0; 2], Matrix::column(&[1.0, 0.0]));
        let k = design_feedback(&sys).unwrap();
        assert!(k.sub(&Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap()).max_abs() < 1e-12);
        let residual = sys.a().sub(&sys.input().matmul(&k));
        assert!(residual.sub(&Matrix::diag(&[0.0, 2.0])).max_abs() < 1e-12);

        let sys = system(Matrix::diag(&[1.0, 2.0]), vec![0.0; 2], Matrix::zeros(2, 1));
        let k = design_feedback(&sys).unwrap();
        assert_eq!(k.max_abs(), 0.0);
        let cert = rate_certificate(&sys, &k, 0.1, FeedbackKind::State, Coupling::Euler).unwrap();
        assert!((cert.tau - 2.0).abs() < 1e-10);
        assert!((cert.contraction - 0.9).abs() < 1e-10, "{}", cert.contraction);
    }

    #[test]
    fn certificate_examples() {
        let sys = system(Matrix::identity(2), vec![0.0; 2], Matrix::identity(2));
        let k = Matrix::identity(2).scale(0.5);
        let cert = rate_certificate(&sys, &k, 1.0, FeedbackKind::State, Coupling::Euler).unwrap();
        assert!((cert.tau - 0.5).abs() < 1e-12);
        assert!((cert.contraction - 0.5).abs() < 1e-12);
        assert!(cert.preserves_argmin);

        let sys = system(Matrix::identity(2), vec![1.0, 0.0], Matrix::identity(2));
        let k = design_feedback(&sys).unwrap();
        let cert = rate_certificate(&sys, &k, 0.5, FeedbackKind::State, Coupling::Euler).unwrap();
        assert!(cert.tau < 1e-12);
        assert!((cert.contraction - 1.0).abs() < 1e-12);
        assert!(cert.fixed_point.is_none());
        assert!(!cert.preserves_argmin);
    }

    #[test]
    fn gradient_feedback_certificate_keeps_argmin() {
        let a = Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let sys = system(a, vec![1.0, -1.0], Matrix::column(&[1.0, 0.5]));
        let k = design_feedback(&sys).unwrap();
        for coupling in [Coupling::Euler, Coupling::Paper] {
            let cert = rate_certificate(&sys, &k, 0.2, FeedbackKind::Gradient, coupling).unwrap();
            assert!(cert.preserves_argmin, "{coupling}");
        }
    }

    #[test]
    fn gradient_gain_removes_actuated_error() {
        let a = Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let sys = system(a.clone(), vec![0.0; 2], Matrix::identity(2));
        let gamma = 0.2;
        let k = design_gradient_feedback(&sys, gamma, Coupling::Euler).unwrap();
        let cert = rate_certificate(&sys, &k, gamma, FeedbackKind::Gradient, Coupling::Euler).unwrap();
        assert!(cert.contraction < 1e-10, "{}", cert.contraction);
        let k = design_gradient_feedback(&sys, gamma, Coupling::Paper).unwrap();
        let cert = rate_certificate(&sys, &k, gamma, FeedbackKind::Gradient, Coupling::Paper).unwrap();
        assert!(cert.contraction < 1e-10, "{}", cert.contraction);
    }

    #[test]
    fn bound_curve_examples() {
        let c = rate_bound_curve(0.5, 1.0, 8.0, 3).unwrap();
        assert_eq!(c.values, vec![8.0, 4.0, 2.0, 1.0]);
        assert!(!c.degenerate_base);
        let c = rate_bound_curve(2.0, 0.5, 3.0, 4).unwrap();
        assert_eq!(c.values[0], 3.0);
        assert!(c.values[1..].iter().all(|&v| v == 0.0));
        assert!(c.degenerate_base);
        assert!(rate_bound_curve(1.0, 1.0, -1.0, 2).is_err());
    }
}
