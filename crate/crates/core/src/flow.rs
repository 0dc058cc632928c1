//! Continuous-time controlled gradient flow `ẋ = −Ax + Bu − b`.
//!
//! Trajectories are produced either by fixed-step RK4 ([`integrate`]) or, for
//! piecewise-constant controls, exactly by variation of constants
//! ([`closed_form_state`]):
//!
//! ```text
//! x(t) = e^{−A(t−T0)} x0 + ∫_{T0}^{t} e^{−A(t−s)} (B u(s) − b) ds
//! ```
//!
//! [`steering_control`] realises the rank condition constructively with the
//! minimum-energy control `u(t) = Bᵀ e^{−Aᵀ(T1−t)} W(T)^{−1} (x_d − x_free(T1))`,
//! where `W(T) = ∫_0^T e^{−As} B Bᵀ e^{−Aᵀs} ds`.

use crate::controllability::{self, ControlSystem};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, vector, Cholesky, Matrix};

/// Simpson subintervals used by [`steering_control`].
pub const DEFAULT_QUAD_NODES: usize = 2000;
/// Gramians with a condition estimate above this are rejected for steering.
pub const MAX_GRAMIAN_CONDITION: f64 = 1e12;

/// Precomputed data of a minimum-energy steering control.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringData {
    input_t: Matrix,
    a_t: Matrix,
    t_end: f64,
    eta: Vec<f64>,
}

/// Open- or closed-loop control `u(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSignal {
    Zero,
    Constant(Vec<f64>),
    /// `u = Kx`, with K of size m × n.
    StateFeedback(Matrix),
    /// `values[i]` applies on `[times[i], times[i+1])`; the last value applies
    /// from `times[last]` on and the first one before `times[0]`.
    PiecewiseConstant { times: Vec<f64>, values: Vec<Vec<f64>> },
    Steering(SteeringData),
}

impl ControlSignal {
    /// Validated piecewise-constant signal.
    pub fn piecewise_constant(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_dim("piecewise_constant (values)", times.len(), values.len())?;
        if times.is_empty() {
            return Err(Error::InvalidParameter("piecewise_constant: no pieces".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "piecewise_constant: times must be strictly increasing".into(),
            ));
        }
        let m = values[0].len();
        for v in &values {
            check_dim("piecewise_constant (value dimension)", m, v.len())?;
        }
        Ok(Self::PiecewiseConstant { times, values })
    }

    /// Checks the signal against the dimensions of `sys`.
    pub fn validate(&self, sys: &ControlSystem) -> Result<()> {
        let (n, m) = (sys.state_dim(), sys.control_dim());
        match self {
            Self::Zero => Ok(()),
            Self::Constant(u) => check_dim("ControlSignal::Constant", m, u.len()),
            Self::StateFeedback(k) => {
                check_dim("ControlSignal::StateFeedback (rows)", m, k.rows())?;
                check_dim("ControlSignal::StateFeedback (cols)", n, k.cols())
            }
            Self::PiecewiseConstant { values, .. } => {
                check_dim("ControlSignal::PiecewiseConstant", m, values[0].len())
            }
            Self::Steering(s) => {
                check_dim("ControlSignal::Steering", m, s.input_t.rows())?;
                check_dim("ControlSignal::Steering", n, s.eta.len())
            }
        }
    }

    /// Control value at time `t` and state `x`.
    ///
    /// With `left_limit` set, piecewise-constant signals return the value
    /// holding just before `t`; otherwise the one holding from `t` on.
    pub fn sample(&self, t: f64, x: &[f64], m: usize, left_limit: bool) -> Result<Vec<f64>> {
        Ok(match self {
            Self::Zero => vec![0.0; m],
            Self::Constant(u) => u.clone(),
            Self::StateFeedback(k) => k.mul_vec(x),
            Self::PiecewiseConstant { times, values } => {
                let count = if left_limit {
                    times.partition_point(|&s| s < t)
                } else {
                    times.partition_point(|&s| s <= t)
                };
                values[count.saturating_sub(1)].clone()
            }
            Self::Steering(s) => {
                let kernel = linalg::mat_exp(&s.a_t, -(s.t_end - t))?;
                s.input_t.mul_vec(&kernel.mul_vec(&s.eta))
            }
        })
    }
}

/// Time-indexed states and controls of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least two nodes")
    }
}

/// Fixed-step classic RK4 on `ẋ = −Ax + B·u(t, x) − b` over `[t0, t1]`.
///
/// Controls are sampled at the stage times; the end-of-step stage takes the
/// left limit of piecewise-constant signals so that breakpoints on the grid
/// are resolved exactly.
pub fn integrate(
    sys: &ControlSystem,
    sig: &ControlSignal,
    x0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Trajectory> {
    check_dim("integrate (x0)", sys.state_dim(), x0.len())?;
    sig.validate(sys)?;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integrate: need finite t1 > t0, got [{t0}, {t1}]"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("integrate: steps must be ≥ 1".into()));
    }
    let m = sys.control_dim();
    let h = (t1 - t0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);

    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        let half = t + 0.5 * h;

        let u1 = sig.sample(t, &x, m, false)?;
        let k1 = sys.vector_field(&x, &u1);
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, d)| a + 0.5 * h * d).collect();
        let k2 = sys.vector_field(&x2, &sig.sample(half, &x2, m, false)?);
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, d)| a + 0.5 * h * d).collect();
        let k3 = sys.vector_field(&x3, &sig.sample(half, &x3, m, false)?);
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, d)| a + h * d).collect();
        let k4 = sys.vector_field(&x4, &sig.sample(t_next, &x4, m, true)?);

        times.push(t);
        states.push(x.clone());
        controls.push(u1);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    controls.push(sig.sample(t1, &x, m, true)?);
    times.push(t1);
    states.push(x);
    Ok(Trajectory {
        times,
        states,
        controls,
    })
}

/// `(e^{−Ah} x, ∫_0^h e^{−Aσ} dσ · v)` combined, from one exponential of the
/// augmented matrix `[[−A, v], [0, 0]]`.
fn propagate_constant(a: &Matrix, x: &[f64], forcing: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = a.rows();
    let aug = Matrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => -a.get(i, j),
        (true, false) => forcing[i],
        _ => 0.0,
    });
    let e = linalg::mat_exp(&aug, h)?;
    Ok((0..n)
        .map(|i| (0..n).map(|j| e.get(i, j) * x[j]).sum::<f64>() + e.get(i, n))
        .collect())
}

/// Exact state at time `t ≥ t0` under a zero, constant or piecewise-constant control.
pub fn closed_form_state(
    sys: &ControlSystem,
    sig: &ControlSignal,
    x0: &[f64],
    t0: f64,
    t: f64,
) -> Result<Vec<f64>> {
    check_dim("closed_form_state (x0)", sys.state_dim(), x0.len())?;
    sig.validate(sys)?;
    if !(t >= t0) || !t.is_finite() {
        return Err(Error::TimeOutOfRange {
            t,
            t0,
            t1: f64::INFINITY,
        });
    }
    let m = sys.control_dim();
    let mut cuts = vec![t0];
    match sig {
        ControlSignal::Zero | ControlSignal::Constant(_) => {}
        ControlSignal::PiecewiseConstant { times, .. } => {
            cuts.extend(times.iter().copied().filter(|&s| s > t0 && s < t));
        }
        _ => {
            return Err(Error::InvalidParameter(
                "closed_form_state needs a zero, constant or piecewise-constant control".into(),
            ))
        }
    }
    cuts.push(t);

    let mut x = x0.to_vec();
    for w in cuts.windows(2) {
        let (start, end) = (w[0], w[1]);
        if end <= start {
            continue;
        }
        let u = sig.sample(start, &x, m, false)?;
        let forcing = vector::sub(&sys.input().mul_vec(&u), sys.problem().b());
        x = propagate_constant(sys.a(), &x, &forcing, end - start)?;
    }
    Ok(x)
}

/// Uncontrolled state after time `horizon`: `e^{−AT} x0 − ∫_0^T e^{−Aσ} dσ · b`.
pub fn free_response(sys: &ControlSystem, x0: &[f64], horizon: f64) -> Result<Vec<f64>> {
    check_dim("free_response (x0)", sys.state_dim(), x0.len())?;
    let neg_b = vector::scale(sys.problem().b(), -1.0);
    propagate_constant(sys.a(), x0, &neg_b, horizon)
}

/// Controllability Gramian `W(T) = ∫_0^T e^{−As} B Bᵀ e^{−Aᵀs} ds` by
/// composite Simpson with `quad_nodes` subintervals (rounded up to even),
/// symmetrised after quadrature.
pub fn gramian(sys: &ControlSystem, horizon: f64, quad_nodes: usize) -> Result<Matrix> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gramian: horizon must be positive, got {horizon}"
        )));
    }
    let intervals = quad_nodes.max(2).next_multiple_of(2);
    let h = horizon / intervals as f64;
    let step = linalg::mat_exp(sys.a(), -h)?;
    let n = sys.state_dim();
    let mut w = Matrix::zeros(n, n);
    let mut kernel = sys.input().clone();
    for k in 0..=intervals {
        if k > 0 {
            kernel = step.matmul(&kernel);
        }
        let weight = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w = w.add(&kernel.matmul(&kernel.transpose()).scale(weight));
    }
    let mut w = w.scale(h / 3.0);
    w.symmetrize();
    Ok(w)
}

/// Condition estimate `λ_max(W) · λ_max(W⁻¹)` from power iteration on `W`
/// and on the action of `W⁻¹`. Infinite when `W` is not positive definite.
pub fn condition_estimate(w: &Matrix) -> f64 {
    let Ok(chol) = Cholesky::new(w) else {
        return f64::INFINITY;
    };
    let n = w.rows();
    let top = linalg::dominant_eigenvalue_psd(n, |v| w.mul_vec(v));
    let inv_top = linalg::dominant_eigenvalue_psd(n, |v| chol.solve(v));
    top * inv_top
}

/// Minimum-energy control steering `x0` at `t0` to `xd` at `t1`.
pub fn steering_control(
    sys: &ControlSystem,
    x0: &[f64],
    xd: &[f64],
    t0: f64,
    t1: f64,
) -> Result<ControlSignal> {
    steering_control_with(sys, x0, xd, t0, t1, DEFAULT_QUAD_NODES)
}

pub fn steering_control_with(
    sys: &ControlSystem,
    x0: &[f64],
    xd: &[f64],
    t0: f64,
    t1: f64,
    quad_nodes: usize,
) -> Result<ControlSignal> {
    let n = sys.state_dim();
    check_dim("steering_control (x0)", n, x0.len())?;
    check_dim("steering_control (xd)", n, xd.len())?;
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "steering_control: need t1 > t0, got [{t0}, {t1}]"
        )));
    }
    let report = controllability::is_controllable(sys, controllability::default_tol(sys))?;
    if !report.controllable {
        return Err(Error::SteeringInfeasible {
            rank: report.rank,
            n,
        });
    }
    let horizon = t1 - t0;
    let w = gramian(sys, horizon, quad_nodes)?;
    let condition = condition_estimate(&w);
    if !(condition <= MAX_GRAMIAN_CONDITION) {
        return Err(Error::IllConditionedGramian { condition });
    }
    let chol = Cholesky::new(&w).map_err(|_| Error::IllConditionedGramian { condition })?;
    let free = free_response(sys, x0, horizon)?;
    let eta = chol.solve(&vector::sub(xd, &free));
    Ok(ControlSignal::Steering(SteeringData {
        input_t: sys.input().transpose(),
        a_t: sys.a().transpose(),
        t_end: t1,
        eta,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::QuadraticProblem;

    fn system(a: Matrix, b: Vec<f64>, input: Matrix) -> ControlSystem {
        ControlSystem::new(QuadraticProblem::new(a, b, 0.0).unwrap(), input).unwrap()
    }

    #[test]
    fn zero_dynamics_keep_state() {
        let sys = system(Matrix::zeros(2, 2), vec![0.0; 2], Matrix::identity(2));
        let tr = integrate(&sys, &ControlSignal::Zero, &[1.5, -2.0], 0.0, 3.0, 10).unwrap();
        assert_eq!(tr.final_state(), &[1.5, -2.0]);
        assert_eq!(tr.times.len(), 11);
        assert_eq!(*tr.times.last().unwrap(), 3.0);
    }

    #[test]
    fn scalar_decay() {
        let sys = system(Matrix::identity(2), vec![0.0; 2], Matrix::identity(2));
        let tr = integrate(&sys, &ControlSignal::Zero, &[1.0, -3.0], 0.0, 1.0, 1000).unwrap();
        let decay = (-1.0f64).exp();
        assert!(vector::max_abs_diff(tr.final_state(), &[decay, -3.0 * decay]) < 1e-8);
    }

    #[test]
    fn pure_integrator() {
        let sys = system(Matrix::zeros(2, 2), vec![0.0; 2], Matrix::identity(2));
        let sig = ControlSignal::Constant(vec![0.5, -1.0]);
        let tr = integrate(&sys, &sig, &[1.0, 1.0], 1.0, 3.0, 7).unwrap();
        assert!(vector::max_abs_diff(tr.final_state(), &[2.0, -1.0]) < 1e-14);
    }

    #[test]
    fn closed_form_homogeneous_and_integrator() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let sys = system(a.clone(), vec![0.0; 2], Matrix::identity(2));
        let x = closed_form_state(&sys, &ControlSignal::Zero, &[1.0, 2.0], 0.5, 1.25).unwrap();
        let expected = linalg::mat_exp(&a, -0.75).unwrap().mul_vec(&[1.0, 2.0]);
        assert!(vector::max_abs_diff(&x, &expected) < 1e-14);

        let sys = system(Matrix::zeros(2, 2), vec![1.0, 0.0], Matrix::identity(2));
        let sig = ControlSignal::piecewise_constant(
            vec![0.0, 1.0],
            vec![vec![2.0, 1.0], vec![0.0, -1.0]],
        )
        .unwrap();
        // t in [0,1]: ẋ = (1, 1); t in [1, 1.5]: ẋ = (−1, −1)
        let x = closed_form_state(&sys, &sig, &[0.0, 0.0], 0.0, 1.5).unwrap();
        assert!(vector::max_abs_diff(&x, &[0.5, 0.5]) < 1e-14);
    }

    #[test]
    fn closed_form_rejects_time_before_start() {
        let sys = system(Matrix::identity(1), vec![0.0], Matrix::identity(1));
        assert!(matches!(
            closed_form_state(&sys, &ControlSignal::Zero, &[1.0], 1.0, 0.5),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn gramian_examples() {
        let sys = system(Matrix::zeros(2, 2), vec![0.0; 2], Matrix::identity(2));
        let w = gramian(&sys, 2.0, 10).unwrap();
        assert!(w.sub(&Matrix::identity(2).scale(2.0)).max_abs() < 1e-14);

        let sys = system(Matrix::zeros(2, 2), vec![0.0; 2], Matrix::column(&[1.0, 0.0]));
        let w = gramian(&sys, 3.0, 10).unwrap();
        assert!(w.sub(&Matrix::diag(&[3.0, 0.0])).max_abs() < 1e-14);
    }

    #[test]
    fn steering_pure_integrator() {
        let sys = system(Matrix::zeros(2, 2), vec![0.0; 2], Matrix::identity(2));
        let x0 = [1.0, -1.0];
        let xd = [3.0, 0.5];
        let sig = steering_control(&sys, &x0, &xd, 0.0, 1.0).unwrap();
        let u = sig.sample(0.3, &x0, 2, false).unwrap();
        assert!(vector::max_abs_diff(&u, &[2.0, 1.5]) < 1e-12);
        let tr = integrate(&sys, &sig, &x0, 0.0, 1.0, 50).unwrap();
        assert!(vector::max_abs_diff(tr.final_state(), &xd) < 1e-12);
    }

    #[test]
    fn steering_to_free_response_needs_no_control() {
        let a = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.5]]).unwrap();
        let sys = system(a, vec![0.3, -0.1], Matrix::identity(2));
        let x0 = [1.0, 2.0];
        let xd = free_response(&sys, &x0, 1.0).unwrap();
        let sig = steering_control(&sys, &x0, &xd, 0.0, 1.0).unwrap();
        let u = sig.sample(0.5, &x0, 2, false).unwrap();
        assert!(vector::norm(&u) < 1e-12, "{u:?}");
    }

    #[test]
    fn steering_rejects_uncontrollable() {
        let sys = system(Matrix::identity(2), vec![0.0; 2], Matrix::column(&[1.0, 0.0]));
        assert!(matches!(
            steering_control(&sys, &[0.0, 0.0], &[1.0, 1.0], 0.0, 1.0),
            Err(Error::SteeringInfeasible { rank: 1, n: 2 })
        ));
    }

    #[test]
    fn piecewise_signal_validation() {
        assert!(ControlSignal::piecewise_constant(vec![0.0, 0.0], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(ControlSignal::piecewise_constant(vec![0.0], vec![]).is_err());
        let sig =
            ControlSignal::piecewise_constant(vec![0.0, 1.0], vec![vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(sig.sample(1.0, &[], 1, false).unwrap(), vec![2.0]);
        assert_eq!(sig.sample(1.0, &[], 1, true).unwrap(), vec![1.0]);
        assert_eq!(sig.sample(-1.0, &[], 1, false).unwrap(), vec![1.0]);
    }
}
