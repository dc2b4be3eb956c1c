//! `sashpcfe`: run reliability studies from JSON configuration files.

mod config;
mod external;
mod report;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 2).
    Config(String),
    /// Failure inside a method (exit code 3).
    Numerical(String),
    /// Reading or writing files (exit code 1).
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<sashpcfe::Error> for CliError {
    fn from(e: sashpcfe::Error) -> Self {
        match e {
            sashpcfe::Error::InvalidConfig(_) => CliError::Config(e.to_string()),
            sashpcfe::Error::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "sashpcfe", version, about = "Surrogate-based structural reliability studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the methods listed in a study configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Drop all marginal truncations.
        #[arg(long)]
        no_truncation: bool,
    },
    /// Summarize the results in an output directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, seed, no_truncation } => {
            let ov = config::Overrides { out, seed, no_truncation };
            config::load(&config, &ov).and_then(|study| {
                run::run(&study)?;
                print!("{}", report::report(&study.output)?);
                Ok(())
            })
        }
        Command::Report { dir } => report::report(&dir).map(|t| print!("{t}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
