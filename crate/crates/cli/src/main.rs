//! `besovlab`: config-driven front end for spectral Besov norms and checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectral_besov::run::{self, Mode, Overrides};

#[derive(Parser)]
#[command(name = "besovlab", version, about = "Littlewood-Paley norms and inequality checks for Dirichlet Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum, profiles, norms, optional kernels and bench, then all checks.
    Run(Common),
    /// Eigenvalues of every level.
    Spectrum(Common),
    /// Requested norms of the function family.
    Norms(Common),
    /// Requested checks only.
    Verify(Common),
    /// Dense against Chebyshev timings and errors.
    Bench(Common),
    /// Dyadic functions on a frequency grid.
    Profiles(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config and SPECTRAL_BESOV_OUT.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Largest N solved densely.
    #[arg(long, value_name = "N")]
    dense_cap: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "K")]
    jobs: Option<usize>,
    /// Failed checks and index constraints are errors.
    #[arg(long, conflicts_with = "report_only")]
    assert: bool,
    /// Report measurements without failing.
    #[arg(long)]
    report_only: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Run(a) => (Mode::Run, a),
        Command::Spectrum(a) => (Mode::Spectrum, a),
        Command::Norms(a) => (Mode::Norms, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Bench(a) => (Mode::Bench, a),
        Command::Profiles(a) => (Mode::Profiles, a),
    };
    if let Some(k) = args.jobs {
        run::set_jobs(k);
    }
    let assert = match (args.assert, args.report_only) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    };
    let overrides = Overrides { out: args.out, seed: args.seed, dense_cap: args.dense_cap, assert };
    let status = run::execute(mode, &args.config, &overrides);
    match &status.reason {
        Some(reason) => eprintln!("besovlab: exit {}: {reason}", status.code),
        None => log::info!("wrote {}", status.out_dir.display()),
    }
    ExitCode::from(status.code as u8)
}
