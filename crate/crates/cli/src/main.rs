//! `solenoid-kms`: measures, cycle vectors and KMS state campaigns from the
//! command line.
//!
//! Commands that produce reports exit with status 0 exactly when every suite
//! passes. Usage errors exit with 2 and other failures with 1.

#[macro_use]
mod output;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(
    name = "solenoid-kms",
    version,
    about = "KMS states of Toeplitz noncommutative solenoids"
)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    /// Decimal places for printed numbers.
    #[arg(long, global = true, default_value_t = 7)]
    precision: usize,
    /// Print reports as JSON instead of one summary line per suite.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Subinvariant measures on the circle.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Extreme subinvariant vectors of the cycle graph.
    #[command(subcommand)]
    Cycle(CycleCmd),
    /// Evaluation and verification of KMS states.
    #[command(subcommand)]
    Kms(KmsCmd),
    /// Run every suite and write a JSON report, plus optional density tables.
    Report {
        /// Report file.
        #[arg(long)]
        out: PathBuf,
        /// Directory for `density_level_<j>.csv` tables (columns t,density).
        #[arg(long)]
        density_dir: Option<PathBuf>,
        /// Sample points per density table.
        #[arg(long, default_value_t = 512)]
        density_points: usize,
    },
}

/// Measure arguments: `lebesgue`, `mr[:rate]`, `mnr:n[:rate]` or
/// `reversed[:rate]`, each optionally followed by `@shift`. A missing rate
/// means `--r`.
#[derive(Debug, Subcommand)]
enum MeasureCmd {
    /// Arc masses of m_r, or its density table when no arc is given.
    Mr {
        #[arg(long, allow_negative_numbers = true)]
        r: f64,
        /// Arc as `start,end`; repeatable.
        #[arg(long = "arc")]
        arcs: Vec<String>,
        /// Density sample points when no arc is given.
        #[arg(long, default_value_t = 16)]
        points: usize,
    },
    /// Check m(R_t U) <= e^{rt} m(U).
    Subinv {
        #[arg(long, allow_negative_numbers = true)]
        r: f64,
        #[arg(long, default_value = "mr")]
        measure: String,
        /// Density grid as `n_t,n_s`.
        #[arg(long, default_value = "64,32")]
        grid: String,
        #[arg(long, default_value_t = solenoid_kms::measures::SUBINVARIANCE_TOL)]
        tol: f64,
    },
    /// Weights on the rotated extremes at dyadic level n.
    Decompose {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value = "mr")]
        measure: String,
    },
    /// Table of ||m_r - m_{n,r}||_1 for n = 1..n_max.
    L1Curve {
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 10)]
        n_max: u32,
        #[arg(long, default_value_t = 256)]
        panels: usize,
    },
    /// Whether agreement with m_r on the last dyadic cell forces equality.
    Probe {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value = "mr")]
        measure: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Debug, Subcommand)]
enum CycleCmd {
    /// Rows v^n_j, one per line.
    Vectors {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        r: f64,
    },
    /// Weights of a subinvariant vector on the v^n_j.
    Decompose {
        /// Defaults to log2 of the vector length.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = 2.0 * std::f64::consts::LN_2)]
        r: f64,
        /// Comma-separated entries.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
}

#[derive(Debug, Subcommand)]
enum KmsCmd {
    /// Evaluate an element `S^m [k:re,im; ...] S*^n + ...` against a state.
    Eval {
        #[arg(long)]
        expr: String,
        #[arg(long, default_value_t = 0)]
        level: u32,
        /// Solenoid coordinates s_0,...,s_J of an extreme state; sets the depth.
        #[arg(long, allow_hyphen_values = true)]
        solenoid: Option<String>,
        /// `extreme`, `trace` or `reversed`; defaults to `trace` at beta = 0.
        #[arg(long)]
        state: Option<String>,
    },
    /// Seeded campaign: KMS identity, invariance, positivity, embeddings,
    /// tower compatibility, factoring, equivariance and freeness.
    Verify {
        /// Also write the reports to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The beta = 0 trace suite.
    Trace0 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gap values per level and whether each state factors through the
    /// noncommutative solenoid.
    FactorTest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = output::Printer {
        precision: cli.precision,
        json: cli.json,
    };
    let cfg = match config::RunConfig::from_env(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Measure(cmd) => commands::measure(cmd, &cfg, &out),
        Command::Cycle(cmd) => commands::cycle(cmd, &cfg, &out),
        Command::Kms(cmd) => commands::kms(cmd, &cfg, &out),
        Command::Report {
            out: path,
            density_dir,
            density_points,
        } => commands::report(&cfg, &out, &path, density_dir.as_deref(), density_points),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}
