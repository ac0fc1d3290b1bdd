//! Batch verification runs over the `parity-transformer` library.
//!
//! Each subcommand resolves its settings from flags and an optional JSON
//! config file, runs its checks, and produces an [`output::Outcome`] holding
//! a JSON report and a text rendering. Reports carry a hash of the resolved
//! configuration and never a timestamp, so reruns are byte-identical.

pub mod calibrate;
pub mod config;
pub mod lemmas;
pub mod output;
pub mod sensitivity;
pub mod verify;

use clap::{Parser, Subcommand};

pub use config::{Flags, Format};
pub use output::{Envelope, Outcome};

#[derive(Parser, Debug)]
#[command(name = "parity-lab", version, about = "Verification runs for hand-built PARITY transformers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Check the four-layer model against XOR, exhaustively and on samples.
    VerifyParity,
    /// Asymptotic checks for the power sums, the Γ bound and W.
    Lemmas,
    /// Average sensitivity, random-model sweep and hyperplane cuts.
    Sensitivity,
    /// Per-length attention gaps for fixed constants.
    GapScan,
    /// Search the constant grid for the smallest certified length.
    Calibrate,
}

/// Runs one command. Check failures come back as an outcome with
/// `pass == false`; configuration and numerical errors as `Err`.
pub fn run(command: Command, flags: &Flags) -> anyhow::Result<Outcome> {
    match command {
        Command::VerifyParity => verify::run(flags),
        Command::Lemmas => lemmas::run(flags),
        Command::Sensitivity => sensitivity::run(flags),
        Command::GapScan => calibrate::run_gap_scan(flags),
        Command::Calibrate => calibrate::run_calibrate(flags),
    }
}

/// Process exit status: 0 when every check passed, 1 when one failed, 2 on
/// errors.
pub fn main_with(cli: Cli) -> i32 {
    let result = cli
        .flags
        .clone()
        .with_config_file()
        .and_then(|flags| {
            let outcome = run(cli.command, &flags)?;
            outcome.emit(flags.format.unwrap_or_default(), flags.out.as_deref())?;
            Ok(outcome)
        });
    match result {
        Ok(o) => {
            eprintln!("{}", o.summary);
            if o.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
