mod args;
mod commands;
mod error;
mod output;
mod presets;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command_line: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::Run(a) => commands::run(a, command_line),
        Command::Stability(a) => commands::stability(a),
        Command::Compare(a) => commands::compare(a, command_line),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
