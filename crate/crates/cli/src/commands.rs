use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lpvsos::lpv::{
    bisect_dwell_time, build_analysis_program, build_synthesis_program, check_certificate, recover_gain,
    BuildOptions, Certificate, CheckReport, DwellSearch, GridSpec, LpvError, LpvProgram, LpvSystem, Mode,
};
use lpvsos::sdp::{export_sdpa as write_sdpa, SolverOptions};
use lpvsos::sim::{
    eval_lyapunov, make_jump_sequence, make_param_trajectory, simulate as run_sim, write_csv, JumpKind, ParamKind,
    SimError, SimOptions,
};
use serde::Serialize;
use thiserror::Error;

use crate::problem::{ProblemFile, SchemaError};
use crate::result::{
    BisectionJson, CertificateJson, GainJson, GridCheckJson, ResultFile, SolverJson,
};
use crate::{AnalysisMode, AnalyzeArgs, CheckArgs, ExportArgs, ProgramArgs, ProgramMode, SimulateArgs, SynthesisMode,
    SynthesizeArgs, TrajKind};

pub const EXIT_INFEASIBLE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{file}: {err}")]
    Schema { file: String, err: SchemaError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Lpv(#[from] LpvError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lpv(LpvError::Sdp(_)) | CliError::Lpv(LpvError::SingularR { .. }) => EXIT_NUMERICAL,
            CliError::Sim(SimError::Lpv(LpvError::SingularR { .. })) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable result");
    s.push('\n');
    s
}

fn load_problem(path: &Path) -> Result<(ProblemFile, LpvSystem), CliError> {
    let file = path.display().to_string();
    let p = ProblemFile::parse(&read(path)?).map_err(|err| CliError::Schema { file: file.clone(), err })?;
    let sys = p.to_system().map_err(|err| CliError::Schema { file, err })?;
    Ok((p, sys))
}

fn load_result(path: &Path) -> Result<ResultFile, CliError> {
    ResultFile::parse(&read(path)?).map_err(|err| CliError::Schema { file: path.display().to_string(), err })
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != N {
        return Err(format!("expected {what}"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("`{p}` is not a number; expected {what}"))?;
    }
    Ok(out)
}

pub fn parse_bisect(s: &str) -> Result<(f64, f64, f64), String> {
    let [lo, hi, tol] = parse_floats::<3>(s, "lo:hi:tol")?;
    if !(lo > 0.0 && lo < hi && tol > 0.0 && hi.is_finite()) {
        return Err("need 0 < lo < hi and tol > 0".into());
    }
    Ok((lo, hi, tol))
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let [a, b] = parse_floats::<2>(s, "T_min:T_max")?;
    if !(a > 0.0 && a <= b && b.is_finite()) {
        return Err("need 0 < T_min <= T_max".into());
    }
    Ok((a, b))
}

fn build_options(args: &ProgramArgs, problem: &ProblemFile) -> Result<BuildOptions, CliError> {
    let degree = args.degree.or(problem.defaults.degree).unwrap_or(2);
    if !(1..=12).contains(&degree) {
        return Err(usage("--degree must be between 1 and 12"));
    }
    let eps = args.epsilon.or(problem.defaults.epsilon).unwrap_or(0.01);
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(usage("--epsilon must be finite and nonnegative"));
    }
    Ok(BuildOptions { degree, eps, verbatim_box: args.verbatim_box })
}

fn solver_options(args: &ProgramArgs) -> Result<SolverOptions, CliError> {
    if !(args.tol > 0.0 && args.tol < 1.0) {
        return Err(usage("--tol must lie in (0, 1)"));
    }
    Ok(SolverOptions { tol: args.tol, ..SolverOptions::default() })
}

fn dwell_arg(args: &ProgramArgs, bisect: Option<(f64, f64, f64)>, what: &str) -> Result<Option<f64>, CliError> {
    if args.range.is_some() {
        return Err(usage(format!("--range does not apply to {what}")));
    }
    match (args.dwell, bisect) {
        (Some(_), Some(_)) => Err(usage("--dwell and --bisect are mutually exclusive")),
        (None, None) => Err(usage(format!("{what} needs --dwell or --bisect"))),
        (d, _) => Ok(d),
    }
}

fn no_timer_args(args: &ProgramArgs, bisect: Option<(f64, f64, f64)>, what: &str) -> Result<(), CliError> {
    if args.dwell.is_some() || args.range.is_some() || bisect.is_some() {
        return Err(usage(format!("{what} takes no --dwell, --range or --bisect")));
    }
    Ok(())
}

fn range_arg(args: &ProgramArgs, bisect: Option<(f64, f64, f64)>, what: &str) -> Result<(f64, f64), CliError> {
    if args.dwell.is_some() || bisect.is_some() {
        return Err(usage(format!("{what} takes --range, not --dwell or --bisect")));
    }
    args.range.ok_or_else(|| usage(format!("{what} needs --range T_min:T_max")))
}

/// Outcome of solving one program or a bisection.
struct Outcome {
    status: String,
    mode: Mode,
    certificate: Option<Certificate>,
    bisection: Option<BisectionJson>,
    solver: Option<SolverJson>,
    message: Option<String>,
}

fn solve_fixed(program: &LpvProgram, solver: &SolverOptions) -> Result<Outcome, CliError> {
    let solved = program.solve(solver)?;
    Ok(Outcome {
        status: solved.status.as_str().into(),
        mode: program.mode,
        certificate: solved.certificate.clone(),
        bisection: None,
        solver: Some(SolverJson::encode(&solved)),
        message: None,
    })
}

fn solve_bisect(
    sys: &LpvSystem,
    search: DwellSearch,
    opts: BuildOptions,
    (lo, hi, tol): (f64, f64, f64),
    solver: &SolverOptions,
) -> Result<Outcome, CliError> {
    let placeholder = match search {
        DwellSearch::MinDwell => Mode::MinDwell { dwell: hi },
        DwellSearch::SynthCt => Mode::SynthCt { dwell: hi },
    };
    match bisect_dwell_time(sys, search, opts, lo, hi, tol, solver) {
        Ok(res) => Ok(Outcome {
            status: "feasible".into(),
            mode: res.certificate.mode,
            certificate: Some(res.certificate.clone()),
            bisection: Some(BisectionJson::encode(&res, lo, hi, tol)),
            solver: None,
            message: None,
        }),
        Err(e @ LpvError::NoCertificate { .. }) => Ok(Outcome {
            status: "infeasible".into(),
            mode: placeholder,
            certificate: None,
            bisection: None,
            solver: None,
            message: Some(e.to_string()),
        }),
        Err(e) => Err(e.into()),
    }
}

fn grid_spec(points: usize) -> GridSpec {
    GridSpec { points, ..GridSpec::default() }
}

fn describe_worst(report: &CheckReport) -> String {
    match report.worst() {
        Some(c) => {
            let at: Vec<String> = c.worst_point.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
            let rel = match c.kind {
                lpvsos::lpv::ConditionKind::Positivity => "min eigenvalue",
                lpvsos::lpv::ConditionKind::Negativity => "max eigenvalue",
            };
            format!("{}: {rel} {:.3e} against bound {:.3e} at {}", c.name, c.value, c.bound, at.join(", "))
        }
        None => "no conditions evaluated".into(),
    }
}

fn finish(
    command: &str,
    problem: ProblemFile,
    sys: &LpvSystem,
    opts: BuildOptions,
    mut outcome: Outcome,
    grid: usize,
    out: Option<&PathBuf>,
) -> Result<u8, CliError> {
    let env = sys.env.clone();
    let mut grid_check = None;
    let mut gain = None;
    if let Some(cert) = &outcome.certificate {
        if cert.mode.is_synthesis() {
            gain = Some(GainJson::encode(&recover_gain(cert)?));
        }
        if grid > 0 {
            let report = check_certificate(sys, cert, &grid_spec(grid))?;
            if !report.passed {
                outcome.status = "numerical-failure".into();
                outcome.message = Some(format!("solver reported feasible but the grid check failed: {}", describe_worst(&report)));
            }
            grid_check = Some(GridCheckJson::encode(&report, grid, GridSpec::default().tol));
        }
    }
    let code = match outcome.status.as_str() {
        "feasible" => 0,
        "infeasible" => EXIT_INFEASIBLE,
        _ => EXIT_NUMERICAL,
    };
    if let Some(m) = &outcome.message {
        eprintln!("{command}: {m}");
    }
    let result = ResultFile {
        command: command.into(),
        status: outcome.status,
        problem,
        mode: outcome.mode.into(),
        degree: opts.degree,
        epsilon: opts.eps,
        bisection: outcome.bisection,
        certificate: outcome.certificate.as_ref().map(|c| CertificateJson::encode(c, &env)),
        gain,
        solver: outcome.solver,
        grid_check,
        message: outcome.message,
    };
    write_out(out, &to_json(&result))?;
    Ok(code)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<u8, CliError> {
    let (problem, sys) = load_problem(&a.program.problem)?;
    let opts = build_options(&a.program, &problem)?;
    let solver = solver_options(&a.program)?;
    let outcome = match a.mode {
        AnalysisMode::MinDwell => match dwell_arg(&a.program, a.bisect, "min-dwell analysis")? {
            Some(dwell) => solve_fixed(&build_analysis_program(&sys, Mode::MinDwell { dwell }, opts)?, &solver)?,
            None => solve_bisect(&sys, DwellSearch::MinDwell, opts, a.bisect.unwrap(), &solver)?,
        },
        AnalysisMode::Quadratic | AnalysisMode::Robust => {
            no_timer_args(&a.program, a.bisect, "quadratic and robust analysis")?;
            let mode = if a.mode == AnalysisMode::Quadratic { Mode::Quadratic } else { Mode::Robust };
            solve_fixed(&build_analysis_program(&sys, mode, opts)?, &solver)?
        }
        AnalysisMode::RangeDwell => {
            let (t_min, t_max) = range_arg(&a.program, a.bisect, "range-dwell analysis")?;
            solve_fixed(&build_analysis_program(&sys, Mode::RangeDwell { t_min, t_max }, opts)?, &solver)?
        }
    };
    finish("analyze", problem, &sys, opts, outcome, a.grid, a.out.as_ref())
}

pub fn synthesize(a: &SynthesizeArgs) -> Result<u8, CliError> {
    let (problem, sys) = load_problem(&a.program.problem)?;
    let opts = build_options(&a.program, &problem)?;
    let solver = solver_options(&a.program)?;
    let outcome = match a.mode {
        SynthesisMode::Ct => match dwell_arg(&a.program, a.bisect, "continuous-time synthesis")? {
            Some(dwell) => solve_fixed(&build_synthesis_program(&sys, Mode::SynthCt { dwell }, opts)?, &solver)?,
            None => solve_bisect(&sys, DwellSearch::SynthCt, opts, a.bisect.unwrap(), &solver)?,
        },
        SynthesisMode::Sd => {
            let (t_min, t_max) = range_arg(&a.program, a.bisect, "sampled-data synthesis")?;
            solve_fixed(&build_synthesis_program(&sys, Mode::SynthSd { t_min, t_max }, opts)?, &solver)?
        }
    };
    finish("synthesize", problem, &sys, opts, outcome, a.grid, a.out.as_ref())
}

#[derive(Debug, Serialize)]
struct SimSummary {
    samples: usize,
    jumps: usize,
    initial_norm: f64,
    final_norm: f64,
    diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    flow_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_violation: Option<f64>,
}

pub fn simulate(a: &SimulateArgs) -> Result<u8, CliError> {
    let result = load_result(&a.gain)?;
    let sys = result
        .problem
        .to_system()
        .map_err(|err| CliError::Schema { file: a.gain.display().to_string(), err })?;
    let cert = result
        .decode_certificate()
        .map_err(|err| CliError::Schema { file: a.gain.display().to_string(), err })?;
    let gain = match &cert {
        Some(c) if c.mode.is_synthesis() => Some(recover_gain(c)?),
        _ => None,
    };
    let np = sys.n_params;
    let broadcast = |v: &[f64], what: &str| -> Result<Vec<f64>, CliError> {
        match v.len() {
            1 => Ok(vec![v[0]; np]),
            k if k == np => Ok(v.to_vec()),
            k => Err(usage(format!("{what} has {k} values for {np} parameters"))),
        }
    };
    let kind = match a.traj {
        TrajKind::Constant => {
            let rho = if a.rho.is_empty() {
                sys.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
            } else {
                broadcast(&a.rho, "--rho")?
            };
            ParamKind::Constant(rho)
        }
        TrajKind::Sin => ParamKind::Sinusoid { nu: broadcast(&a.nu, "--nu")?, phase: a.phase },
        TrajKind::PhaseJump => ParamKind::PhaseJumpSinusoid { nu: broadcast(&a.nu, "--nu")?, seed: a.seed },
    };
    let traj = make_param_trajectory(kind, &sys.bounds)?;
    let jump_seed = a.seed.wrapping_add(1);
    let jump_kind = if !a.jumps.is_empty() {
        JumpKind::Explicit(a.jumps.clone())
    } else {
        match result.mode.into() {
            Mode::MinDwell { dwell } | Mode::SynthCt { dwell } => JumpKind::MinDwell { dwell, seed: jump_seed },
            Mode::RangeDwell { t_min, t_max } | Mode::SynthSd { t_min, t_max } => {
                JumpKind::RangeDwell { t_min, t_max, seed: jump_seed }
            }
            Mode::Quadratic | Mode::Robust => JumpKind::Explicit(vec![]),
        }
    };
    let jumps = make_jump_sequence(&jump_kind, a.horizon)?;
    let x0 = if a.x0.is_empty() { vec![1.0; sys.n] } else { a.x0.clone() };
    let sampled = matches!(result.mode.into(), Mode::SynthSd { .. });
    let u0 = if a.u0.is_empty() { vec![0.0; sys.m] } else { a.u0.clone() };
    let opts = SimOptions { step: a.step, horizon: a.horizon, timer_offset: a.timer_offset };
    let out = run_sim(&sys, gain.as_ref(), &traj, &jumps, &x0, sampled.then_some(u0.as_slice()), &opts)?;
    let report = match &cert {
        Some(c) => Some(eval_lyapunov(&sys, Some(c), &out)?),
        None => None,
    };
    let mut csv = Vec::new();
    write_csv(&mut csv, &sys, &out, report.as_ref().map(|r| r.values.as_slice()))?;
    let summary = SimSummary {
        samples: out.len(),
        jumps: out.jump_indices.len(),
        initial_norm: x0.iter().map(|v| v * v).sum::<f64>().sqrt(),
        final_norm: out.final_norm(),
        diverged: out.diverged,
        flow_violation: report.as_ref().map(|r| r.flow_violation).filter(|v| v.is_finite()),
        jump_violation: report.as_ref().map(|r| r.jump_violation).filter(|v| v.is_finite()),
    };
    let csv = String::from_utf8(csv).expect("csv is utf-8");
    match &a.out {
        Some(path) => {
            write_out(Some(path), &csv)?;
            write_out(None, &to_json(&summary))?;
        }
        None => {
            write_out(None, &csv)?;
            eprint!("{}", to_json(&summary));
        }
    }
    Ok(if out.diverged { EXIT_INFEASIBLE } else { 0 })
}

#[derive(Debug, Serialize)]
struct CheckOutput {
    command: &'static str,
    status: &'static str,
    grid_check: GridCheckJson,
}

pub fn check(a: &CheckArgs) -> Result<u8, CliError> {
    let result = load_result(&a.cert)?;
    let file = a.cert.display().to_string();
    let sys = result.problem.to_system().map_err(|err| CliError::Schema { file: file.clone(), err })?;
    let cert = result
        .decode_certificate()
        .map_err(|err| CliError::Schema { file: file.clone(), err })?
        .ok_or_else(|| CliError::Schema { file, err: SchemaError::new("/certificate", "no certificate to check") })?;
    if !(a.tol >= 0.0) {
        return Err(usage("--tol must be nonnegative"));
    }
    let grid = GridSpec { points: a.grid, sigma_points: a.sigma_points, mu_interior: a.mu_interior, tol: a.tol, ..GridSpec::default() };
    let report = check_certificate(&sys, &cert, &grid)?;
    if !report.passed {
        eprintln!("check failed: {}", describe_worst(&report));
    }
    let output = CheckOutput {
        command: "check",
        status: if report.passed { "passed" } else { "failed" },
        grid_check: GridCheckJson::encode(&report, a.grid, a.tol),
    };
    write_out(a.out.as_ref(), &to_json(&output))?;
    Ok(if report.passed { 0 } else { EXIT_INFEASIBLE })
}

pub fn export_sdpa(a: &ExportArgs) -> Result<u8, CliError> {
    let (problem, sys) = load_problem(&a.program.problem)?;
    let opts = build_options(&a.program, &problem)?;
    let p = &a.program;
    let program = match a.mode {
        ProgramMode::MinDwell => {
            let dwell = dwell_arg(p, None, "min-dwell export")?.unwrap();
            build_analysis_program(&sys, Mode::MinDwell { dwell }, opts)?
        }
        ProgramMode::Quadratic => {
            no_timer_args(p, None, "quadratic export")?;
            build_analysis_program(&sys, Mode::Quadratic, opts)?
        }
        ProgramMode::Robust => {
            no_timer_args(p, None, "robust export")?;
            build_analysis_program(&sys, Mode::Robust, opts)?
        }
        ProgramMode::RangeDwell => {
            let (t_min, t_max) = range_arg(p, None, "range-dwell export")?;
            build_analysis_program(&sys, Mode::RangeDwell { t_min, t_max }, opts)?
        }
        ProgramMode::Ct => {
            let dwell = dwell_arg(p, None, "continuous-time synthesis export")?.unwrap();
            build_synthesis_program(&sys, Mode::SynthCt { dwell }, opts)?
        }
        ProgramMode::Sd => {
            let (t_min, t_max) = range_arg(p, None, "sampled-data synthesis export")?;
            build_synthesis_program(&sys, Mode::SynthSd { t_min, t_max }, opts)?
        }
    };
    let sdp = program.compile()?;
    write_out(Some(&a.out), &write_sdpa(&sdp))?;
    Ok(0)
}
