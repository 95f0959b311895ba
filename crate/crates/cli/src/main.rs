mod args;
mod commands;
mod error;
mod meta;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Benchmark(a) => commands::benchmark::run(a),
        Command::KnockoffDiagnostics(a) => commands::diagnostics::run(a),
        Command::Fetch(a) => commands::fetch::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
