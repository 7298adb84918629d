use std::process::ExitCode;

use clap::Parser;
use normdescent_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, normdescent_cli::error::CliError::ChecksFailed(_)) {
                eprintln!("error: {e}");
            } else {
                eprintln!("{e}");
            }
            e.into()
        }
    }
}
