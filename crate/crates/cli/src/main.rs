//! `lpvsos`: dwell-time certificates and gain-scheduled controllers for LPV
//! systems with jumps, driven by JSON problem files.

mod commands;
mod problem;
mod result;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lpvsos", version, about = "Dwell-time analysis and synthesis for LPV systems with jumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify stability (fixed dwell time, bisection, range dwell time, quadratic or robust).
    Analyze(AnalyzeArgs),
    /// Design a continuous-time or sampled-data gain-scheduled state feedback.
    Synthesize(SynthesizeArgs),
    /// Simulate the closed (or open) loop of a result file and export a CSV trajectory.
    Simulate(SimulateArgs),
    /// Re-check the certificate of a result file on a parameter grid.
    Check(CheckArgs),
    /// Write the SDP of a problem in SDPA sparse format.
    ExportSdpa(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisMode {
    MinDwell,
    Quadratic,
    Robust,
    RangeDwell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthesisMode {
    Ct,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProgramMode {
    MinDwell,
    Quadratic,
    Robust,
    RangeDwell,
    Ct,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajKind {
    Constant,
    Sin,
    PhaseJump,
}

/// Options shared by every command that builds an SOS program.
#[derive(Debug, Clone, Args)]
pub struct ProgramArgs {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    /// Polynomial degree of the certificate (defaults to the problem file, then 2).
    #[arg(long)]
    pub degree: Option<u32>,
    /// Strictness margin ε (defaults to the problem file, then 0.01).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Dwell time T̄.
    #[arg(long)]
    pub dwell: Option<f64>,
    /// Range dwell time `T_min:T_max`.
    #[arg(long, value_parser = commands::parse_range)]
    pub range: Option<(f64, f64)>,
    /// Drop ε from the flow condition of min-dwell programs.
    #[arg(long)]
    pub verbatim_box: bool,
    /// Solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub mode: AnalysisMode,
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Bisect the dwell time over `lo:hi:tol`.
    #[arg(long, value_parser = commands::parse_bisect)]
    pub bisect: Option<(f64, f64, f64)>,
    /// Points per axis for the post-solve grid check (0 skips it).
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    /// Result file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthesizeArgs {
    #[arg(long, value_enum)]
    pub mode: SynthesisMode,
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Bisect the dwell time over `lo:hi:tol` (continuous-time mode).
    #[arg(long, value_parser = commands::parse_bisect)]
    pub bisect: Option<(f64, f64, f64)>,
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Result file of `synthesize` (closed loop) or `analyze` (open loop).
    #[arg(long, visible_alias = "cert")]
    pub gain: PathBuf,
    /// Parameter trajectory. `phase-jump` redraws the phase at every jump, so the
    /// parameter is discontinuous there; sampled-data certificates assume it is not.
    #[arg(long, value_enum, default_value = "phase-jump")]
    pub traj: TrajKind,
    /// Rate bound(s) of the sinusoidal parameter trajectories, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub nu: Vec<f64>,
    /// Parameter value(s) for the constant trajectory, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    /// Phase of the `sin` trajectory.
    #[arg(long, default_value_t = 0.0)]
    pub phase: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Initial state, comma separated (all ones by default).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// Initial held input for sampled-data loops (zeros by default).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u0: Vec<f64>,
    /// Explicit jump times; by default they are drawn from the certificate's dwell-time class.
    #[arg(long, value_delimiter = ',')]
    pub jumps: Vec<f64>,
    /// Constant offset of the controller timer.
    #[arg(long, default_value_t = 0.0)]
    pub timer_offset: f64,
    /// Trajectory CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Result file holding the certificate.
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    #[arg(long, default_value_t = 20)]
    pub sigma_points: usize,
    /// Extra points between derivative vertices.
    #[arg(long, default_value_t = 0)]
    pub mu_interior: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long, value_enum)]
    pub mode: ProgramMode,
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Output file (`.dat-s`).
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Synthesize(a) => commands::synthesize(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Check(a) => commands::check(&a),
        Command::ExportSdpa(a) => commands::export_sdpa(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
