mod cli;
mod commands;
mod config;
mod manifest;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(c) => commands::simulate_cmd(c),
        Command::Fit(c) => commands::fit_cmd(c),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Plotdata(a) => commands::plotdata_cmd(a),
        Command::Ingest(c) => commands::ingest_cmd(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.stage.exit_code())
        }
    }
}
