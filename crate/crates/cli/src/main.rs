mod args;
mod commands;
mod error;
mod settings;

use std::panic;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // Help and version go to stdout; everything else to stderr.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = panic::catch_unwind(|| commands::dispatch(cli))
        .unwrap_or_else(|_| Err(CliError::Internal("unexpected panic".into())));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("germfeed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
