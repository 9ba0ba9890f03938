use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use platelab_cli::{parse_config, run_command, Command, RunOptions, EXIT_CONFIG, EXIT_VERIFY_FAILED};

#[derive(Parser)]
#[command(
    name = "platelab",
    version,
    about = "Damped plate experiments: energy decay, spectra, resolvents, Carleman weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the output files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write whitespace-separated `.dat` plot files.
    #[arg(long)]
    plot_data: bool,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the damped plate and record the energy trace.
    Simulate(Common),
    /// Eigenvalues of the generator and the spectral abscissa.
    Spectrum(Common),
    /// Resolvent norm along the imaginary axis.
    Sweep(Common),
    /// Solve resolvent problems and evaluate the transmission residuals.
    ResolventCase(Common),
    /// Check a pair of Carleman weights.
    Carleman(Common),
    /// Run the built-in property suite.
    Verify(Common),
}

fn configure_threads() {
    if let Some(n) = std::env::var("PLATELAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Spectrum(c) => (Command::Spectrum, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::ResolventCase(c) => (Command::ResolventCase, c),
        Sub::Carleman(c) => (Command::Carleman, c),
        Sub::Verify(c) => (Command::Verify, c),
    };
    let config = match common.config.as_deref().map(parse_config).transpose() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let options = RunOptions {
        out: common.out,
        plot_data: common.plot_data,
        seed: common.seed,
    };
    match run_command(command, config.as_ref(), &options) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
