use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::RunManifest;
use super::CliError;
use crate::controllability::{self, ControlSystem};
use crate::cs::{self, CsPolicy, ExperimentConfig, RegimeSpec, Signal};
use crate::descent::{self, ControlPolicy, Coupling, DescentConfig};
use crate::flow::{self, ControlSignal};
use crate::io::{self, fmt_num, CsvTable, IoError};
use crate::linalg::{self, vector, Matrix};
use crate::prox::{self, ProxQuery};
use crate::selftest;

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `1,2,3` or `[1,2,3]` into a vector.
fn parse_vector(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("--{flag}: '{}' is not a finite number", s.trim())))
        })
        .collect()
}

fn parse_opt_vector(flag: &str, text: Option<&str>) -> CliResult<Option<Vec<f64>>> {
    text.map(|t| parse_vector(flag, t)).transpose()
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    Ok(io::sha256_hex(&bytes))
}

/// Checks replayed inputs against the digests recorded in the manifest.
fn verify_inputs(manifest: &RunManifest) -> CliResult {
    for (path, digest) in &manifest.input_digests {
        let now = file_digest(Path::new(path))?;
        if &now != digest {
            return Err(CliError::Replay(format!(
                "input {path} changed since the manifest was written (sha256 {now}, recorded {digest})"
            )));
        }
    }
    Ok(())
}

fn load_replay<T: serde::de::DeserializeOwned>(path: &Path, subcommand: &str) -> CliResult<(RunManifest, T)> {
    let manifest = RunManifest::load(path)?;
    if manifest.subcommand != subcommand {
        return Err(CliError::Usage(format!(
            "{}: manifest was written by '{}', not '{subcommand}'",
            path.display(),
            manifest.subcommand
        )));
    }
    verify_inputs(&manifest)?;
    let params = manifest.parameters(path)?;
    Ok((manifest, params))
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn to_json_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("parameters serialise")
}

fn pretty_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("value serialises");
    s.push('\n');
    s.into_bytes()
}

// ---------------------------------------------------------------- controllability

#[derive(Debug, Args)]
pub struct ControllabilityArgs {
    /// System JSON file
    #[arg(long)]
    pub system: PathBuf,
    /// Relative singular-value tolerance (default max(n, n·m)·ε·1e3)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file, `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
}

pub fn controllability(args: ControllabilityArgs) -> CliResult {
    let sys = io::load_system(&args.system)?;
    let tol = args.tol.unwrap_or_else(|| controllability::default_tol(&sys));
    let report = controllability::is_controllable(&sys, tol)?;
    let newton = controllability::newton_controllable(sys.input())?;
    let out = json!({
        "n": sys.state_dim(),
        "m": sys.control_dim(),
        "rank": report.rank,
        "controllable": report.controllable,
        "tol_used": report.tol_used,
        "newton_controllable": newton,
        "kalman": report.kalman,
    });
    io::write_output(&args.out, &pretty_json(&out))?;
    Ok(())
}

// ---------------------------------------------------------------- flow

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// System JSON file
    #[arg(long, required_unless_present = "from_manifest")]
    pub system: Option<PathBuf>,
    /// Initial state, comma separated (default 0)
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Target state; switches to minimum-energy steering
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    /// Constant control, comma separated (default 0)
    #[arg(long, allow_hyphen_values = true, conflicts_with = "target")]
    pub u: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub t1: f64,
    /// RK4 steps
    #[arg(long, default_value_t = 4000)]
    pub steps: usize,
    /// Simpson subintervals for the steering Gramian
    #[arg(long, default_value_t = flow::DEFAULT_QUAD_NODES)]
    pub quad_nodes: usize,
    /// CSV output, `-` for stdout
    #[arg(long)]
    pub out: Option<String>,
    /// Write a run manifest here
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Replay the run recorded in a manifest
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub system: PathBuf,
    pub x0: Option<Vec<f64>>,
    pub target: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub quad_nodes: usize,
    pub out: String,
}

pub fn flow(args: FlowArgs) -> CliResult {
    let params = match &args.from_manifest {
        Some(path) => {
            let (_, mut p): (_, FlowParams) = load_replay(path, "flow")?;
            if let Some(out) = &args.out {
                p.out = out.clone();
            }
            p
        }
        None => FlowParams {
            system: required(args.system.clone(), "system")?,
            x0: parse_opt_vector("x0", args.x0.as_deref())?,
            target: parse_opt_vector("target", args.target.as_deref())?,
            u: parse_opt_vector("u", args.u.as_deref())?,
            t0: args.t0,
            t1: args.t1,
            steps: args.steps,
            quad_nodes: args.quad_nodes,
            out: args.out.clone().unwrap_or_else(|| "-".into()),
        },
    };
    let start = Instant::now();
    let sys = io::load_system(&params.system)?;
    let n = sys.state_dim();
    let x0 = params.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let signal = match (&params.target, &params.u) {
        (Some(xd), _) => {
            flow::steering_control_with(&sys, &x0, xd, params.t0, params.t1, params.quad_nodes)?
        }
        (None, Some(u)) => ControlSignal::Constant(u.clone()),
        (None, None) => ControlSignal::Zero,
    };
    let traj = flow::integrate(&sys, &signal, &x0, params.t0, params.t1, params.steps)?;

    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    header.extend((0..sys.control_dim()).map(|j| format!("u_{j}")));
    header.push("f_value".into());
    let mut table = CsvTable::with_header(header);
    for ((t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.controls) {
        let mut row = vec![fmt_num(*t)];
        row.extend(x.iter().map(|v| fmt_num(*v)));
        row.extend(u.iter().map(|v| fmt_num(*v)));
        row.push(fmt_num(sys.problem().eval(x)?));
        table.push(row);
    }
    let bytes = table.render().into_bytes();
    io::write_output(&params.out, &bytes)?;

    if let Some(path) = &args.manifest {
        let mut m = RunManifest::new("flow", to_json_value(&params));
        m.input_digests.insert(
            params.system.display().to_string(),
            file_digest(&params.system)?,
        );
        m.record_output(&params.out, &bytes);
        if let Some(xd) = &params.target {
            m.report = json!({ "terminal_error": vector::dist(traj.final_state(), xd) });
        }
        m.wall_clock_seconds = start.elapsed().as_secs_f64();
        m.write(path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- descend

#[derive(Debug, Args)]
pub struct DescendArgs {
    /// System JSON file
    #[arg(long, required_unless_present = "from_manifest")]
    pub system: Option<PathBuf>,
    /// Starting point, comma separated (default 0)
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// zero | constant | state-fb | grad-fb
    #[arg(long, default_value = "zero")]
    pub policy: String,
    /// auto | pinv | path to a JSON array of gain rows
    #[arg(long, default_value = "auto")]
    pub gain: String,
    /// Control for the constant policy, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Step size (default 1/(2‖A‖))
    #[arg(long)]
    pub gamma: Option<f64>,
    /// paper | euler
    #[arg(long, default_value = "euler")]
    pub coupling: String,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Stop once the gradient norm is at most this
    #[arg(long, default_value_t = 0.0)]
    pub stop_tol: f64,
    /// CSV output, `-` for stdout
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescendParams {
    pub system: PathBuf,
    pub x0: Option<Vec<f64>>,
    pub policy: String,
    pub gain: String,
    pub u: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub coupling: Coupling,
    pub iters: usize,
    pub stop_tol: f64,
    pub out: String,
}

fn descend_policy(
    p: &DescendParams,
    sys: &ControlSystem,
    gamma: f64,
    inputs: &mut Vec<PathBuf>,
) -> CliResult<(ControlPolicy, Matrix)> {
    let mut gain = |designed: &dyn Fn() -> crate::Result<Matrix>| -> CliResult<Matrix> {
        match p.gain.as_str() {
            "auto" => Ok(designed()?),
            "pinv" => Ok(descent::design_feedback(sys)?),
            path => {
                let path = PathBuf::from(path);
                let text = io::read_text(&path)?;
                let k: Matrix = io::parse_json(&path, &text)?;
                inputs.push(path);
                Ok(k)
            }
        }
    };
    let m = sys.control_dim();
    let n = sys.state_dim();
    Ok(match p.policy.as_str() {
        "zero" => (ControlPolicy::Zero, Matrix::zeros(m, n)),
        "constant" => {
            let u = required(p.u.clone(), "u")?;
            (ControlPolicy::Constant(u), Matrix::zeros(m, n))
        }
        "state-fb" => {
            let k = gain(&|| descent::design_feedback(sys))?;
            (ControlPolicy::StateFeedback(k.clone()), k)
        }
        "grad-fb" => {
            let k = gain(&|| descent::design_gradient_feedback(sys, gamma, p.coupling))?;
            (ControlPolicy::GradientFeedback(k.clone()), k)
        }
        other => {
            return Err(CliError::Usage(format!(
                "--policy: unknown policy '{other}' (expected zero, constant, state-fb or grad-fb)"
            )))
        }
    })
}

pub fn descend(args: DescendArgs) -> CliResult {
    let params = match &args.from_manifest {
        Some(path) => {
            let (_, mut p): (_, DescendParams) = load_replay(path, "descend")?;
            if let Some(out) = &args.out {
                p.out = out.clone();
            }
            p
        }
        None => DescendParams {
            system: required(args.system.clone(), "system")?,
            x0: parse_opt_vector("x0", args.x0.as_deref())?,
            policy: args.policy.clone(),
            gain: args.gain.clone(),
            u: parse_opt_vector("u", args.u.as_deref())?,
            gamma: args.gamma,
            coupling: args.coupling.parse()?,
            iters: args.iters,
            stop_tol: args.stop_tol,
            out: args.out.clone().unwrap_or_else(|| "-".into()),
        },
    };
    let start = Instant::now();
    let sys = io::load_system(&params.system)?;
    let mut inputs = vec![params.system.clone()];
    let gamma = params.gamma.unwrap_or_else(|| DescentConfig::default_gamma(&sys));
    let cfg = DescentConfig::new(gamma, params.iters, params.stop_tol, params.coupling)?;
    let (policy, gain) = descend_policy(&params, &sys, gamma, &mut inputs)?;
    let x0 = params.x0.clone().unwrap_or_else(|| vec![0.0; sys.state_dim()]);
    let reference = sys.problem().solve_critical().ok();
    let rec = descent::run_descent(&sys, &policy, &x0, &cfg, reference.as_deref())?;

    let tau = linalg::spectral_norm(&sys.a().sub(&sys.input().matmul(&gain)));
    let bound = match &rec.dist_to_ref {
        Some(d) => Some(descent::rate_bound_curve(tau, gamma, d[0], rec.len() - 1)?),
        None => None,
    };
    let mut table = CsvTable::new(&[
        "iter",
        "f_value",
        "grad_norm",
        "dist_to_ref",
        "control_norm",
        "bound_value",
    ]);
    for k in 0..rec.len() {
        table.push(vec![
            k.to_string(),
            fmt_num(rec.f_values[k]),
            fmt_num(rec.grad_norms[k]),
            rec.dist_to_ref.as_ref().map_or(String::new(), |d| fmt_num(d[k])),
            fmt_num(rec.control_norms[k]),
            bound.as_ref().map_or(String::new(), |b| fmt_num(b.values[k])),
        ]);
    }
    let bytes = table.render().into_bytes();
    io::write_output(&params.out, &bytes)?;

    if let Some(path) = &args.manifest {
        let mut m = RunManifest::new("descend", to_json_value(&params));
        for input in &inputs {
            m.input_digests.insert(input.display().to_string(), file_digest(input)?);
        }
        m.record_output(&params.out, &bytes);
        m.report = json!({
            "gamma": gamma,
            "tau": tau,
            "iterations_used": rec.iterations_used,
            "converged": rec.converged,
            "bound_base_degenerate": bound.as_ref().map(|b| b.degenerate_base),
        });
        m.wall_clock_seconds = start.elapsed().as_secs_f64();
        m.write(path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- prox

#[derive(Debug, Args)]
pub struct ProxArgs {
    /// System JSON file
    #[arg(long)]
    pub system: PathBuf,
    /// Prox centre, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    /// Control, comma separated (default 0)
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    #[arg(long)]
    pub gamma: f64,
    /// JSON output, `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
}

pub fn prox(args: ProxArgs) -> CliResult {
    let sys = io::load_system(&args.system)?;
    let z = parse_vector("z", &args.z)?;
    let u = parse_opt_vector("u", args.u.as_deref())?.unwrap_or_else(|| vec![0.0; sys.control_dim()]);
    let q = ProxQuery {
        problem: sys.problem().clone(),
        input: sys.input().clone(),
        u,
        gamma: args.gamma,
        z,
    };
    let cmp = prox::prox_resolvent_equivalence(&q)?;
    io::write_output(&args.out, &pretty_json(&cmp))?;
    if !cmp.within_tolerance {
        return Err(CliError::Failed(format!(
            "prox and resolvent differ by {:.3e} > {:.3e}",
            cmp.max_abs_diff, cmp.tolerance
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- cs

#[derive(Debug, Args)]
pub struct CsArgs {
    /// Signal dimension
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    /// Comma-separated ratios m/n
    #[arg(long, default_value = "2,1,0.5")]
    pub ratios: String,
    /// Number of control channels
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// grad-fb | grad-fb-pinv | state-fb | constant:<v> | zero
    #[arg(long, default_value = "grad-fb")]
    pub policy: String,
    #[arg(long, default_value_t = 5000)]
    pub iters: usize,
    /// Master seed (falls back to CTRLGRAD_SEED, then 0)
    #[arg(long, env = "CTRLGRAD_SEED")]
    pub seed: Option<u64>,
    /// gaussian | spike:<k>
    #[arg(long, default_value = "gaussian")]
    pub signal: String,
    /// paper | euler
    #[arg(long, default_value = "euler")]
    pub coupling: String,
    /// Output directory for the CSV files and manifest.json
    #[arg(long, required_unless_present = "from_manifest")]
    pub outdir: Option<PathBuf>,
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsParams {
    pub n: usize,
    pub ratios: Vec<f64>,
    pub d: usize,
    pub policy: CsPolicy,
    pub iters: usize,
    pub seed: u64,
    pub signal: Signal,
    pub coupling: Coupling,
    pub outdir: PathBuf,
}

pub fn cs(args: CsArgs) -> CliResult {
    let params = match &args.from_manifest {
        Some(path) => {
            let (_, mut p): (_, CsParams) = load_replay(path, "cs")?;
            if let Some(dir) = &args.outdir {
                p.outdir = dir.clone();
            }
            p
        }
        None => CsParams {
            n: args.n,
            ratios: parse_vector("ratios", &args.ratios)?,
            d: args.d,
            policy: args.policy.parse()?,
            iters: args.iters,
            seed: args.seed.unwrap_or(0),
            signal: args.signal.parse()?,
            coupling: args.coupling.parse()?,
            outdir: required(args.outdir.clone(), "outdir")?,
        },
    };
    let start = Instant::now();
    let cfg = ExperimentConfig {
        spec: RegimeSpec::new(params.n, params.ratios.clone())?,
        d: params.d,
        policy: params.policy,
        iters: params.iters,
        seed: params.seed,
        signal: params.signal,
        coupling: params.coupling,
    };
    let results = cs::run_regime_experiment(&cfg)?;

    fs::create_dir_all(&params.outdir).map_err(|e| IoError::io(&params.outdir, e))?;
    let mut manifest = RunManifest::new("cs", to_json_value(&params));
    manifest.seeds.insert("seed".into(), params.seed);
    let mut summary = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let name = format!("regime{i}_m{}.csv", r.m);
        let bytes = r.to_csv().render().into_bytes();
        io::write_atomic(&params.outdir.join(&name), &bytes)?;
        manifest.record_output(&name, &bytes);
        manifest.seeds.insert(format!("regime{i}.sensing"), r.seeds.sensing);
        manifest.seeds.insert(format!("regime{i}.input"), r.seeds.input);
        manifest.seeds.insert(format!("regime{i}.start"), r.seeds.start);
        let xbar_norm = vector::norm(&r.problem.signal);
        let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN) / xbar_norm;
        summary.push(json!({
            "ratio": r.ratio,
            "m": r.m,
            "csv": name,
            "lipschitz_exact": r.lipschitz.exact,
            "lipschitz_paper_approx": r.lipschitz.paper_approx,
            "gamma": r.gamma,
            "kalman_rank": r.kalman_rank,
            "final_relative_error_gd": last(r.errors_gd()),
            "final_relative_error_cgd": last(r.errors_cgd()),
        }));
    }
    manifest.report = json!({ "regimes": summary });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&params.outdir.join("manifest.json"))?;
    io::write_output("-", &pretty_json(&summary))?;
    Ok(())
}

// ---------------------------------------------------------------- selftest

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Report output, `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
}

pub fn selftest(args: SelftestArgs) -> CliResult {
    let report = selftest::run_suite();
    io::write_output(&args.out, report.render().as_bytes())?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "{} of {} self-test checks failed",
            report.failures(),
            report.checks.len()
        )))
    }
}
