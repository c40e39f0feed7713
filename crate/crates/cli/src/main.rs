mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

/// Null space constants, recovery thresholds and property suites for small
/// sensing matrices.
#[derive(Debug, Parser)]
#[command(name = "nsclab", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for matrix generation, restarts and trials [default: 0; verify
    /// uses the configured suite seed].
    #[arg(long, global = true, env = "NSCLAB_SEED")]
    pub seed: Option<u64>,

    /// Write records here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, value_name = "INT")]
    pub jobs: Option<usize>,

    /// Rank tolerance; defaults to 1e-10·max(M, N).
    #[arg(long, global = true, value_name = "FLOAT")]
    pub rank_tol: Option<f64>,

    /// Add wall-clock milliseconds to each record.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct MatrixSource {
    /// Matrix file: one comma-separated row per line, `#` comments.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,

    /// Generate a matrix, e.g. gaussian:4x8 or uniform:3x6.
    #[arg(long = "gen", value_name = "DIST:MxN")]
    pub generate: Option<String>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub source: MatrixSource,

    /// Scale generated columns to unit ℓ2 norm.
    #[arg(long, requires = "generate")]
    pub unit_columns: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Grid,
    Multistart,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Multistart restarts.
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,

    /// Search every support of size k separately.
    #[arg(long)]
    pub exhaustive: bool,

    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// γ(ℓp, A, k) with status and certificate.
    Nsc {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        k: usize,
        /// Relative zero threshold for p = 0.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Spark with a witness column set.
    Spark {
        #[command(flatten)]
        matrix: MatrixArgs,
    },
    /// Largest recoverable sparsity k*_p on a grid of p.
    Staircase {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, value_name = "LO:HI:STEPS", default_value = "0:1:101")]
        p_grid: String,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Bracket for the largest p with γ(ℓp, A, k) < 1.
    Pstar {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        k: usize,
        /// Bracket width.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Table of γ(ℓp, A, k) for k = 1..=kmax over a p grid.
    Curves {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, value_name = "LO:HI:STEPS", default_value = "0:1:101")]
        p_grid: String,
        /// Largest k; defaults to spark − 1.
        #[arg(long)]
        kmax: Option<usize>,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Solve one instance (--y) or run a recovery experiment.
    Recover {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        p: f64,
        /// Sparsity of the generated vectors.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Measurement vector file; solves this instance instead of running trials.
        #[arg(long, value_name = "FILE")]
        y: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Run every support of size k with three draws each.
        #[arg(long)]
        exhaustive: bool,
        /// Largest support size searched at p = 0; defaults to the row count.
        #[arg(long)]
        kmax: Option<usize>,
        /// ∞-norm error that counts as recovery.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// IRLS starts for p < 1.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
    /// A sparse vector that ℓp minimization fails to single out.
    Witness {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Write a generated matrix in the text format.
    Gen {
        #[arg(long = "gen", value_name = "DIST:MxN")]
        generate: String,
        #[arg(long)]
        unit_columns: bool,
    },
    /// Run property suites; exits 1 if any property fails.
    Verify {
        /// Suite name, or `all`.
        suite: String,
        /// Overrides the configured trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Suite scales file; defaults to the bundled one.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = commands::exit_code(&e);
            eprintln!("nsclab: {e:#}");
            ExitCode::from(code)
        }
    }
}
