//! The `ctrlgrad` command line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical contract violation,
//! 3 I/O or parse error.

mod commands;
mod manifest;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub use commands::{
    ControllabilityArgs, CsArgs, CsParams, DescendArgs, DescendParams, FlowArgs, FlowParams,
    ProxArgs, SelftestArgs,
};
pub use manifest::{OutputEntry, RunManifest};

use crate::io::IoError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONTRACT: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numeric(crate::Error),
    #[error(transparent)]
    Io(IoError),
    /// A replayed input no longer matches its recorded digest.
    #[error("{0}")]
    Replay(String),
    /// A check reported failure after producing its output.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Numeric(_) | Self::Failed(_) => EXIT_CONTRACT,
            Self::Io(IoError::Invalid { .. }) => EXIT_CONTRACT,
            Self::Io(_) | Self::Replay(_) => EXIT_IO,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidParameter(_) | crate::Error::Dimension { .. } => {
                Self::Usage(e.to_string())
            }
            other => Self::Numeric(other),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::Io(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ctrlgrad",
    version,
    about = "Controlled gradient flows and controlled gradient descent for quadratic objectives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kalman rank test of a system file
    Controllability(ControllabilityArgs),
    /// Integrate the controlled flow, optionally steering to a target
    Flow(FlowArgs),
    /// Run controlled gradient descent
    Descend(DescendArgs),
    /// Evaluate the controlled prox and the controlled resolvent
    Prox(ProxArgs),
    /// Compressed-sensing experiment across sampling regimes
    Cs(CsArgs),
    /// Run the embedded invariant suite
    Selftest(SelftestArgs),
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Controllability(a) => commands::controllability(a),
        Command::Flow(a) => commands::flow(a),
        Command::Descend(a) => commands::descend(a),
        Command::Prox(a) => commands::prox(a),
        Command::Cs(a) => commands::cs(a),
        Command::Selftest(a) => commands::selftest(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
