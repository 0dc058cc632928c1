//! Compressed-sensing benchmark with noiseless Gaussian measurements.
//!
//! `f_cs(x) = ‖A_s x − y‖²/(2m)` with `A_s` an m × n standard Gaussian matrix
//! and `y = A_s x̄`. Objective and gradient both carry the `1/m` factor.
//!
//! Stream layout of [`generate_sensing`] for `seeded_rng(seed)`: `A_s`
//! row-major, then the signal (`n` Gaussians, or for `spike(k)` the `k`
//! partial Fisher–Yates swaps followed by `k` sign draws).
//!
//! [`run_regime_experiment`] derives three seeds per regime `i` from the
//! master seed: `derive_seed(seed, 3i)` for the sensing problem,
//! `derive_seed(seed, 3i + 1)` for the n × d input matrix and
//! `derive_seed(seed, 3i + 2)` for the Gaussian starting point.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controllability::{self, ControlSystem};
use crate::descent::{self, ControlPolicy, Coupling, DescentConfig, RunRecord};
use crate::error::{Error, Result};
use crate::io::{fmt_num, CsvTable};
use crate::linalg::{self, vector, Matrix};
use crate::quadratic::QuadraticProblem;
use crate::rng;

/// Default ratios m/n: oversampled, sampled, undersampled.
pub const DEFAULT_RATIOS: [f64; 3] = [2.0, 1.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Gaussian,
    /// `k` entries equal to ±1, the rest zero.
    Spike(usize),
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gaussian" {
            return Ok(Self::Gaussian);
        }
        if let Some(k) = s.strip_prefix("spike:") {
            return k
                .parse()
                .map(Self::Spike)
                .map_err(|_| Error::InvalidParameter(format!("bad spike count '{k}'")));
        }
        Err(Error::InvalidParameter(format!(
            "unknown signal '{s}' (expected gaussian or spike:<k>)"
        )))
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian => f.write_str("gaussian"),
            Self::Spike(k) => write!(f, "spike:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingProblem {
    pub sensing: Matrix,
    pub signal: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl SensingProblem {
    pub fn n(&self) -> usize {
        self.sensing.cols()
    }

    pub fn m(&self) -> usize {
        self.sensing.rows()
    }
}

pub fn generate_sensing(n: usize, m: usize, seed: u64, signal: Signal) -> Result<SensingProblem> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "generate_sensing: n and m must be ≥ 1 (got {n}, {m})"
        )));
    }
    if let Signal::Spike(k) = signal {
        if k > n {
            return Err(Error::InvalidParameter(format!("spike count {k} exceeds n = {n}")));
        }
    }
    let mut stream = rng::seeded_rng(seed);
    let sensing = rng::gaussian_matrix(&mut stream, m, n);
    let xbar = match signal {
        Signal::Gaussian => rng::gaussian_vec(&mut stream, n),
        Signal::Spike(k) => {
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = stream.random_range(i..n);
                idx.swap(i, j);
            }
            let mut x = vec![0.0; n];
            for &i in &idx[..k] {
                x[i] = if stream.random_bool(0.5) { 1.0 } else { -1.0 };
            }
            x
        }
    };
    let y = sensing.mul_vec(&xbar);
    Ok(SensingProblem {
        sensing,
        signal: xbar,
        y,
        seed,
    })
}

/// `A = A_sᵀA_s/m`, `b = −A_sᵀy/m`, `c = ‖y‖²/(2m)`.
pub fn to_quadratic(sp: &SensingProblem) -> Result<QuadraticProblem> {
    let inv_m = 1.0 / sp.m() as f64;
    let a = sp.sensing.gram().scale(inv_m);
    let b = vector::scale(&sp.sensing.tr_mul_vec(&sp.y), -inv_m);
    let c = 0.5 * inv_m * vector::dot(&sp.y, &sp.y);
    QuadraticProblem::new(a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    /// `λ_max(A_sᵀA_s/m)`
    pub exact: f64,
    /// `√m`
    pub paper_approx: f64,
}

pub fn lipschitz_estimate(sp: &SensingProblem) -> LipschitzEstimate {
    let s = linalg::spectral_norm(&sp.sensing);
    LipschitzEstimate {
        exact: s * s / sp.m() as f64,
        paper_approx: (sp.m() as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub n: usize,
    pub ratios: Vec<f64>,
}

impl RegimeSpec {
    pub fn new(n: usize, ratios: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("regime n must be ≥ 1".into()));
        }
        if ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidParameter(format!("ratios must be positive: {ratios:?}")));
        }
        Ok(Self { n, ratios })
    }

    /// `m = round(ratio · n)`, at least 1.
    pub fn measurements(&self, ratio: f64) -> usize {
        ((ratio * self.n as f64).round() as usize).max(1)
    }
}

impl Default for RegimeSpec {
    fn default() -> Self {
        Self {
            n: 128,
            ratios: DEFAULT_RATIOS.to_vec(),
        }
    }
}

/// Control rule of the controlled run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsPolicy {
    /// `u = K∇f` with the gain of [`descent::design_gradient_feedback`].
    #[default]
    GradFeedback,
    /// `u = K∇f` with `K = B⁺A`.
    GradFeedbackPinv,
    /// `u = Kx` with `K = B⁺A`.
    StateFeedback,
    /// `u_k = value · (1, …, 1)`.
    Constant(f64),
    Zero,
}

impl FromStr for CsPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad-fb" => Ok(Self::GradFeedback),
            "grad-fb-pinv" => Ok(Self::GradFeedbackPinv),
            "state-fb" => Ok(Self::StateFeedback),
            "zero" => Ok(Self::Zero),
            other => match other.strip_prefix("constant:") {
                Some(v) => v
                    .parse()
                    .map(Self::Constant)
                    .map_err(|_| Error::InvalidParameter(format!("bad constant '{v}'"))),
                None => Err(Error::InvalidParameter(format!("unknown policy '{other}'"))),
            },
        }
    }
}

impl fmt::Display for CsPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GradFeedback => f.write_str("grad-fb"),
            Self::GradFeedbackPinv => f.write_str("grad-fb-pinv"),
            Self::StateFeedback => f.write_str("state-fb"),
            Self::Constant(v) => write!(f, "constant:{v}"),
            Self::Zero => f.write_str("zero"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: RegimeSpec,
    pub d: usize,
    pub policy: CsPolicy,
    pub iters: usize,
    pub seed: u64,
    pub signal: Signal,
    pub coupling: Coupling,
}

/// Seeds used for one regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeSeeds {
    pub sensing: u64,
    pub input: u64,
    pub start: u64,
}

impl RegimeSeeds {
    pub fn derive(seed: u64, regime: usize) -> Self {
        let base = 3 * regime as u64;
        Self {
            sensing: rng::derive_seed(seed, base),
            input: rng::derive_seed(seed, base + 1),
            start: rng::derive_seed(seed, base + 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeResult {
    pub ratio: f64,
    pub m: usize,
    pub seeds: RegimeSeeds,
    pub problem: SensingProblem,
    pub input: Matrix,
    pub x0: Vec<f64>,
    pub lipschitz: LipschitzEstimate,
    pub gamma: f64,
    /// Kalman rank of `(A, B)`; `None` when the Kalman matrix is not finite.
    pub kalman_rank: Option<usize>,
    pub gd: RunRecord,
    pub cgd: RunRecord,
}

impl RegimeResult {
    /// `‖x_k − x̄‖` of the plain run.
    pub fn errors_gd(&self) -> &[f64] {
        self.gd.dist_to_ref.as_deref().unwrap_or_default()
    }

    /// `‖x_k − x̄‖` of the controlled run.
    pub fn errors_cgd(&self) -> &[f64] {
        self.cgd.dist_to_ref.as_deref().unwrap_or_default()
    }

    /// CSV with columns `iter,l2_error_gd,l2_error_cgd,f_gd,f_cgd`. A run
    /// that stopped early repeats its last row values.
    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(&["iter", "l2_error_gd", "l2_error_cgd", "f_gd", "f_cgd"]);
        let rows = self.gd.len().max(self.cgd.len());
        let at = |v: &[f64], k: usize| v[k.min(v.len() - 1)];
        for k in 0..rows {
            table.push(vec![
                k.to_string(),
                fmt_num(at(self.errors_gd(), k)),
                fmt_num(at(self.errors_cgd(), k)),
                fmt_num(at(&self.gd.f_values, k)),
                fmt_num(at(&self.cgd.f_values, k)),
            ]);
        }
        table
    }
}

fn build_policy(policy: CsPolicy, sys: &ControlSystem, gamma: f64, coupling: Coupling) -> Result<ControlPolicy> {
    Ok(match policy {
        CsPolicy::GradFeedback => {
            ControlPolicy::GradientFeedback(descent::design_gradient_feedback(sys, gamma, coupling)?)
        }
        CsPolicy::GradFeedbackPinv => ControlPolicy::GradientFeedback(descent::design_feedback(sys)?),
        CsPolicy::StateFeedback => ControlPolicy::StateFeedback(descent::design_feedback(sys)?),
        CsPolicy::Constant(v) => ControlPolicy::Constant(vec![v; sys.control_dim()]),
        CsPolicy::Zero => ControlPolicy::Zero,
    })
}

/// Runs plain and controlled descent on every regime of `cfg.spec`, both with
/// `γ = 1/L_exact` from the same Gaussian starting point.
pub fn run_regime_experiment(cfg: &ExperimentConfig) -> Result<Vec<RegimeResult>> {
    let spec = RegimeSpec::new(cfg.spec.n, cfg.spec.ratios.clone())?;
    if cfg.iters == 0 {
        return Err(Error::InvalidParameter("iters must be ≥ 1".into()));
    }
    let n = spec.n;
    let mut results = Vec::with_capacity(spec.ratios.len());
    for (i, &ratio) in spec.ratios.iter().enumerate() {
        let m = spec.measurements(ratio);
        let seeds = RegimeSeeds::derive(cfg.seed, i);
        let problem = generate_sensing(n, m, seeds.sensing, cfg.signal)?;
        let quad = to_quadratic(&problem)?;
        let input = rng::gaussian_matrix(&mut rng::seeded_rng(seeds.input), n, cfg.d);
        let x0 = rng::gaussian_vec(&mut rng::seeded_rng(seeds.start), n);
        let lipschitz = lipschitz_estimate(&problem);
        let gamma = 1.0 / lipschitz.exact;
        let sys = ControlSystem::new(quad, input.clone())?;

        let kalman = controllability::kalman_matrix(&sys);
        let kalman_rank = if kalman.is_finite() && cfg.d > 0 {
            Some(linalg::numerical_rank(&kalman, controllability::default_tol(&sys))?)
        } else if cfg.d == 0 {
            Some(0)
        } else {
            None
        };

        let dcfg = DescentConfig::new(gamma, cfg.iters, 0.0, cfg.coupling)?;
        let reference = Some(problem.signal.as_slice());
        let gd = descent::run_descent(&sys, &ControlPolicy::Zero, &x0, &dcfg, reference)?;
        let policy = build_policy(cfg.policy, &sys, gamma, cfg.coupling)?;
        let cgd = descent::run_descent(&sys, &policy, &x0, &dcfg, reference)?;
        results.push(RegimeResult {
            ratio,
            m,
            seeds,
            problem,
            input,
            x0,
            lipschitz,
            gamma,
            kalman_rank,
            gd,
            cgd,
        });
    }
    Ok(results)
}

/// Aggregated rank statistics for one `(n, m, d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub trials: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    pub mean_rank: f64,
    pub frac_lower_ok: f64,
    pub frac_upper_ok: f64,
    /// Fraction with `d ≤ rank ≤ min(n, n·d)`.
    pub frac_bracket_ok: f64,
}

/// Rank bracket sweep; trial `t` of the `j`-th `d` uses
/// `derive_seed(seed, j·trials + t)`. No rows when `trials = 0`.
pub fn gaussian_controllability_sweep(
    n: usize,
    m: usize,
    ds: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(ds.len());
    for (j, &d) in ds.iter().enumerate() {
        let mut ranks = Vec::with_capacity(trials);
        let (mut lower, mut upper, mut both) = (0usize, 0usize, 0usize);
        for t in 0..trials {
            let s = rng::derive_seed(seed, (j * trials + t) as u64);
            let r = controllability::gaussian_rank_check(n, m, d, s)?;
            ranks.push(r.rank);
            lower += r.lower_ok as usize;
            upper += r.upper_ok as usize;
            both += (r.lower_ok && r.upper_ok) as usize;
        }
        let tf = trials as f64;
        rows.push(SweepRow {
            n,
            m,
            d,
            trials,
            min_rank: *ranks.iter().min().expect("trials > 0"),
            max_rank: *ranks.iter().max().expect("trials > 0"),
            mean_rank: ranks.iter().sum::<usize>() as f64 / tf,
            frac_lower_ok: lower as f64 / tf,
            frac_upper_ok: upper as f64 / tf,
            frac_bracket_ok: both as f64 / tf,
        });
    }
    Ok(rows)
}
