use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = aimd_cli::commands::Cli::parse();
    match aimd_cli::commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
