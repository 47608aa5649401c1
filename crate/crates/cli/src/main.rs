//! `sad` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical divergence.

mod args;
mod commands;
mod run;

use std::process::ExitCode;

use clap::Parser;
use sad_core::SadError;

use args::{Cli, Command};
use commands::{launch, replay};
use run::{output_base, UsageError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<SadError>() {
            return if e.is_divergence() {
                EXIT_DIVERGED
            } else if matches!(e, SadError::Config(_)) {
                EXIT_USAGE
            } else {
                EXIT_DATA
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let base = output_base(cli.out_dir.as_deref());
    let result = match cli.command {
        Command::Simulate(a) => launch(a, &base),
        Command::Train(a) => launch(a, &base),
        Command::Gibbs(a) => launch(a, &base),
        Command::Evaluate(a) => launch(a, &base),
        Command::Replay(a) => replay(&a.manifest, &base),
    };
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
