//! Command layer of the `tdekit` binary: argument parsing, config merging
//! and the subcommands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Preset, RunConfig};

/// Failure classes mapped to exit codes 2 (bad input) and 3 (runtime).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    /// Process exit code for this failure.
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<tdekit_core::Error> for CliError {
    fn from(e: tdekit_core::Error) -> Self {
        use tdekit_core::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::OutOfRange(_)
            | E::Format { .. }
            | E::VersionMismatch { .. }
            | E::TruncatedBlob { .. }
            | E::ChecksumMismatch { .. }
            | E::Json { .. } => Self::Usage(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<tdekit_neural::Error> for CliError {
    fn from(e: tdekit_neural::Error) -> Self {
        use tdekit_neural::Error as E;
        match e {
            E::Core(inner) => inner.into(),
            E::InvalidArgument(_) | E::Shape { .. } | E::Checkpoint { .. } | E::VersionMismatch { .. } => {
                Self::Usage(e.to_string())
            }
            _ => Self::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tdekit", version, about = "Acoustic time delay estimation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON file with settings; keys match the effective config echoed at startup.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Default settings for generation, model and training.
    #[arg(long, global = true, value_enum, default_value = "desk")]
    pub preset: Preset,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "TDEKIT_THREADS")]
    pub threads: Option<usize>,
    /// Only log errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// More logging (repeat for trace output).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of simulated rooms.
    Simulate(commands::SimulateArgs),
    /// Train the network on a dataset.
    Train(commands::TrainArgs),
    /// Sliding-window TDOA over two WAV files.
    Infer(commands::InferArgs),
    /// Score estimators on a dataset.
    Evaluate(commands::EvaluateArgs),
    /// Inlier ratio versus SNR or T60 on freshly simulated scenarios.
    Sweep(commands::SweepArgs),
    /// Dump one room impulse response.
    Rir(commands::RirArgs),
    /// GCC-PHAT TDOA of two whole WAV files.
    Gccphat(commands::GccArgs),
}

/// Runs one parsed command line. Logging is left to the caller.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    log::debug!("using {} worker threads", rayon::current_num_threads());
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&cli.global, a),
        Command::Train(a) => commands::train(&cli.global, a),
        Command::Infer(a) => commands::infer(&cli.global, a),
        Command::Evaluate(a) => commands::evaluate(&cli.global, a),
        Command::Sweep(a) => commands::sweep(&cli.global, a),
        Command::Rir(a) => commands::rir(&cli.global, a),
        Command::Gccphat(a) => commands::gccphat(&cli.global, a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::usage(e.to_string()))?;
    run(cli)
}
