//! Command-line experiment driver.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};

use config::{CommonArgs, Settings};
use output::Manifest;

/// Bad flags, config or input files (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "dynregimes",
    version,
    about = "Speciation and collapse experiments for diffusion models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clone-probability curve and spectral speciation time.
    Speciation(CommonArgs),
    /// Excess entropy, atom-level cloning and nearest-atom collapse times.
    Collapse(CommonArgs),
    /// REM free energies on the time grid.
    Rem(CommonArgs),
    /// Closed-form mixture theory: clone probability by quadrature.
    Gm(CommonArgs),
    /// One backward trajectory (plus nearest atoms for a dataset).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Integrate the scalar overlap q instead of the full state.
        #[arg(long)]
        reduced: bool,
    },
    /// Excess-entropy curve only.
    Entropy(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Speciation(c) | Command::Collapse(c) | Command::Rem(c) | Command::Gm(c) | Command::Entropy(c) => c,
            Command::Simulate { common, .. } => common,
        }
    }
}

/// Runs a parsed command on a pool of `workers` threads.
pub fn run(cli: &Cli) -> anyhow::Result<Manifest> {
    let settings = Settings::resolve(cli.command.common())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(settings.workers).build()?;
    pool.install(|| match &cli.command {
        Command::Speciation(_) => commands::speciation(settings),
        Command::Collapse(_) => commands::collapse(settings),
        Command::Rem(_) => commands::rem(settings),
        Command::Gm(_) => commands::gm(settings),
        Command::Simulate { reduced, .. } => commands::simulate(settings, *reduced),
        Command::Entropy(_) => commands::entropy(settings),
    })
}

/// 2 for usage errors, 1 for numerical failures.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<dynregimes::Error>() {
        Some(dynregimes::Error::InvalidInput(_) | dynregimes::Error::Format(_)) => 2,
        _ => 1,
    }
}
