//! `phivar`: Φ-variation studies of Takagi-type functions from the command line.
//!
//! Every subcommand accepts the same flags (see `phivar <command> --help`) or
//! a JSON configuration via `--config`, with flags overriding file values.
//! Exit status: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 runtime cap exceeded, 4 gauge-domain violation. Failures print one JSON
//! object on stderr.

use clap::{Parser, Subcommand};
use phivar_cli::config::{Command, Flags};
use phivar_cli::{drive, report, Failure};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phivar", version, about = "Phi-variation of Takagi-type functions along dyadic partitions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// V_{n,t}^Φ at a single level.
    #[command(allow_negative_numbers = true)]
    Variation(Flags),
    /// V_n^Φ along a list of levels, against the theoretical limit.
    #[command(allow_negative_numbers = true)]
    Study(Flags),
    /// Moments of the limit law, the coupling distance, or E ∫|dX|.
    #[command(allow_negative_numbers = true)]
    Limits(Flags),
    /// Wasserstein-1 distance of Z_n/s_n to the standard normal.
    #[command(allow_negative_numbers = true)]
    Clt(Flags),
    /// Sample path on the level-n dyadic grid.
    #[command(allow_negative_numbers = true)]
    Path(Flags),
    /// Tabulate the four growth conditions against ℓ.
    #[command(allow_negative_numbers = true)]
    Conditions(Flags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let f = Failure::Config(vec![e.render().to_string().trim().to_string()]);
            return report(&f);
        }
    };
    let (command, flags) = match cli.command {
        Sub::Variation(f) => (Command::Variation, f),
        Sub::Study(f) => (Command::Study, f),
        Sub::Limits(f) => (Command::Limits, f),
        Sub::Clt(f) => (Command::Clt, f),
        Sub::Path(f) => (Command::Path, f),
        Sub::Conditions(f) => (Command::Conditions, f),
    };
    match drive(command, &flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
