use std::process::ExitCode;

use clap::Parser;
use diffnet::cli::{run, Cli, ErrorRecord};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = ErrorRecord::new(cli.command.name(), &err);
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| err.to_string()));
            ExitCode::FAILURE
        }
    }
}
