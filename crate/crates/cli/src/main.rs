//! `hoi` — kernel-based tests for d-order statistical interactions.
//!
//! Subcommands: `test` runs one hypothesis test on a CSV dataset,
//! `power` sweeps rejection rates over a generator grid, `synth` dumps
//! synthetic datasets, `lattice` prints partition-lattice facts, and
//! `bench` times the estimators. Exit codes: 0 success, 2 usage error,
//! 3 data error, 4 resource-guard error.

mod bench_cmd;
mod config;
mod dataio;
mod lattice_cmd;
mod power_cmd;
mod synth_cmd;
mod test_cmd;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, bad config file, out-of-range parameters → exit 2.
    Usage(String),
    /// Unreadable or malformed input data → exit 3.
    Data(String),
    /// A computation refused as too large → exit 4.
    Guard(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Guard(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Guard(m) => m,
        }
    }
}

/// Core errors raised while validating user-supplied parameters.
pub fn core_usage(e: hoi_core::Error) -> Failure {
    match e {
        hoi_core::Error::ResourceGuard(_) => Failure::Guard(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

/// Core errors raised while processing input data.
pub fn core_data(e: hoi_core::Error) -> Failure {
    match e {
        hoi_core::Error::ResourceGuard(_) => Failure::Guard(e.to_string()),
        _ => Failure::Data(e.to_string()),
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

/// Knobs shared by the analysis subcommands. Each may also come from
/// `--config` (a TOML file with the same names); flags win.
#[derive(Args, Debug)]
pub struct RunOpts {
    /// Significance level for the composite decision.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Monte-Carlo permutations per sub-test.
    #[arg(long)]
    pub permutations: Option<usize>,

    /// Base seed; all randomness derives from it deterministically.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads for trial-level parallelism (0 = all cores).
    /// Results never depend on this.
    #[arg(long)]
    pub workers: Option<usize>,

    /// TOML config file supplying defaults for these knobs.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output file (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<OutFormat>,
}

pub fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p)
                .map_err(|e| Failure::Data(format!("creating {}: {e}", p.display())))?;
            Ok(Box::new(file))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

#[derive(Parser)]
#[command(
    name = "hoi",
    version,
    about = "Kernel-based tests for d-order statistical interactions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one hypothesis test on a CSV dataset and emit a JSON report.
    Test(test_cmd::TestArgs),
    /// Sweep rejection rates over a generator parameter grid.
    Power(power_cmd::PowerArgs),
    /// Generate a synthetic dataset and dump it as CSV.
    Synth(synth_cmd::SynthArgs),
    /// Print partition counts, sub-hypothesis counts and lattice matrices.
    Lattice(lattice_cmd::LatticeArgs),
    /// Time the statistic estimators and fit scaling exponents.
    Bench(bench_cmd::BenchArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Test(args) => test_cmd::run(args),
        Command::Power(args) => power_cmd::run(args),
        Command::Synth(args) => synth_cmd::run(args),
        Command::Lattice(args) => lattice_cmd::run(args),
        Command::Bench(args) => bench_cmd::run(args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.code());
    }
}
