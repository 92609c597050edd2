use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = hvcm_cli::Cli::parse();
    match hvcm_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hvcm: {e:#}");
            ExitCode::FAILURE
        }
    }
}
