//! Command line front end: instances, spectra, densities, bounds, walks and
//! seeded experiments, with CSV or JSON output.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use cayley_sieve::SieveError;
use clap::{ArgAction, Parser, Subcommand};

use commands::{AlonRoichmanCmd, BoundCmd, DensityCmd, ExperimentCmd, InstanceCmd, SpectrumCmd, WalkCmd};

#[derive(Debug, Parser)]
#[command(name = "cayley-sieve", version, about = "Random walk sieve on labeling groups", propagate_version = true)]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG takes precedence.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads; every result is independent of this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an instance and write its block system, or its generator system with --generators.
    Instance(InstanceCmd),
    /// Character spectrum of a block Cayley graph or of an explicit abelian group.
    Spectrum(SpectrumCmd),
    /// Target set density per block.
    Density(DensityCmd),
    /// Sieve bound terms per k and eta mode.
    Bound(BoundCmd),
    /// Simulate the walk and report per-block detections.
    Walk(WalkCmd),
    /// Expansion failure rate of random Cayley graphs.
    AlonRoichman(AlonRoichmanCmd),
    /// Survival frequencies against the exact oracle and the bounds.
    Experiment(ExperimentCmd),
}

fn exit_code(err: &SieveError) -> u8 {
    match err {
        SieveError::Invariant(_) => 2,
        SieveError::Capacity { .. } => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<(), SieveError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| SieveError::Parameter(e.to_string()))?;
    }
    match &cli.command {
        Command::Instance(cmd) => commands::instance(cmd),
        Command::Spectrum(cmd) => commands::spectrum(cmd),
        Command::Density(cmd) => commands::density(cmd),
        Command::Bound(cmd) => commands::bound(cmd),
        Command::Walk(cmd) => commands::walk(cmd),
        Command::AlonRoichman(cmd) => commands::alon_roichman(cmd),
        Command::Experiment(cmd) => commands::experiment(cmd, cli.threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
