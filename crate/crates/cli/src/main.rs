//! `potapprox` command-line driver.
//!
//! Exit codes: 0 success (including a solve that stops at the sweep cap), 1
//! a failed verification, 2 usage errors and malformed input, 3 rejected
//! input such as the zero tensor.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "potapprox", version, about = "Low-rank partially orthogonal tensor approximation")]
struct Cli {
    /// JSON object of flags for the subcommand; explicit flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plant a partially orthogonal tensor and write it with its ground truth.
    Generate(GenerateArgs),
    /// Run the solver on a tensor file.
    Solve(SolveArgs),
    /// Time a batch of seeded random problems.
    Bench(BenchArgs),
    /// Check a solve log and result against the convergence guarantees.
    Verify(VerifyArgs),
    /// Estimate the convergence rate of a solve log.
    Rate(RateArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct GenerateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub s: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes `<out>.tns` and `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub s: usize,
    /// Proximal threshold; defaults to 1e-3·‖A‖.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Truncation threshold; defaults to half its admissible bound.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = potapprox::solver::DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
    #[arg(long)]
    pub stop_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    /// CSV sweep log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// JSON result.
    #[arg(long)]
    pub result: Option<PathBuf>,
    /// Write measured wall times into the log instead of zeros.
    #[arg(long)]
    pub timing: bool,
    /// Record the KKT residual after every sweep.
    #[arg(long)]
    pub track_kkt: bool,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "6,6,6")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 2)]
    pub s: usize,
    /// Number of problems in the batch.
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    /// Run the batch on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    /// Tensor the log was produced from.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
    /// JSON report; printed to stdout as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// KKT tolerance relative to ‖A‖ for converged runs.
    #[arg(long, default_value_t = 1e-6)]
    pub kkt_tol: f64,
    /// Skip re-running the solve, and with it the λ-chain check.
    #[arg(long)]
    pub no_replay: bool,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct RateArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Ground-truth sidecar; its objective is used as f*.
    #[arg(long, conflicts_with = "f_star")]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub f_star: Option<f64>,
    /// Tensor of the run; sets the noise floor scale to ‖A‖².
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_threads() -> Result<(), commands::Failure> {
    let Ok(v) = std::env::var("POTAPPROX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| commands::Failure::usage(format!("POTAPPROX_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::Failure::usage(e.to_string()))
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let run = init_threads().and_then(|()| match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Bench(a) => commands::bench(a),
        Command::Verify(a) => commands::verify(a),
        Command::Rate(a) => commands::rate(a),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
