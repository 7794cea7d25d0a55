use std::process::ExitCode;

use clap::Parser;
use fisherform_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match fisherform_cli::run(&cli) {
        Ok(status) => {
            println!("{status}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
