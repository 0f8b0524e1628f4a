//! `shsk`: generate problems, run solvers, sweep strategies and check rate
//! certificates.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "shsk", version, about = "Surrogate-hyperplane sparse Kaczmarz solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a problem bundle (A.mtx, b.txt, xhat.txt, meta.json).
    Generate(GenerateArgs),
    /// Run one strategy on a bundle.
    Solve(SolveArgs),
    /// Run several strategies on several bundles and print a CSV table.
    Bench(BenchArgs),
    /// Print the convergence constants of a bundle and optionally check a history.
    Bounds(BoundsArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Rows of a standard Gaussian matrix.
    #[arg(long, required_unless_present = "mtx", conflicts_with = "mtx", requires = "n")]
    pub m: Option<usize>,
    /// Columns of a standard Gaussian matrix.
    #[arg(long, requires = "m")]
    pub n: Option<usize>,
    /// Matrix Market file to plant a solution for instead of a Gaussian matrix.
    #[arg(long)]
    pub mtx: Option<PathBuf>,
    /// Nonzeros of the planted solution; defaults to max(1, round(0.01 n)).
    #[arg(long)]
    pub nnz: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = shsk::problems::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Relative noise level ||e|| / ||b||.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone)]
pub struct StopArgs {
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rse_tol: f64,
    /// Relative residual tolerance, used when RSE stopping does not apply.
    #[arg(long, default_value_t = 1e-8)]
    pub res_tol: f64,
}

#[derive(Args)]
pub struct SolveArgs {
    pub bundle: PathBuf,
    /// shskr, shskpr, greedy, rsk, cyclic or gaussian.
    #[arg(long)]
    pub strategy: String,
    /// Partial-residual parameter in [0, 1]; required for shskpr.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Write the per-iteration history CSV here.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Skip the Bregman distance column.
    #[arg(long)]
    pub no_bregman: bool,
    /// Check the recorded run against the rate certificates.
    #[arg(long)]
    pub certificates: bool,
    #[arg(long, default_value_t = shsk::analysis::DEFAULT_ENUMERATION_LIMIT)]
    pub n_limit: usize,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(required = true)]
    pub bundles: Vec<PathBuf>,
    /// Comma-separated `name` or `shskpr:theta` entries.
    #[arg(long, default_value = "shskpr:1,shskpr:0.5,shskpr:0,shskr")]
    pub strategies: String,
    /// Runs per randomized strategy; the median is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateCheck {
    /// Also check the residual-weight contraction `(1 - q)`.
    Residual,
    /// Check only the per-step decrease.
    None,
}

#[derive(Args)]
pub struct BoundsArgs {
    pub bundle: PathBuf,
    /// History CSV (with a bregman column) to verify.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = shsk::analysis::DEFAULT_ENUMERATION_LIMIT)]
    pub n_limit: usize,
    /// Which contraction to check the history against.
    #[arg(long, value_enum, default_value_t = RateCheck::Residual)]
    pub rate: RateCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Bounds(a) => commands::bounds(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            if let Some(usage) = e.downcast_ref::<commands::UsageError>() {
                eprintln!("usage error: {usage}");
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
