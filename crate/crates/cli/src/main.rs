mod commands;
mod config;
mod error;
mod selftest;

use std::process::ExitCode;

use clap::Parser;

use commands::EXIT_ERROR;
use config::{Cli, Command, RunConfig};
use error::CliError;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(cli)?;
    log::info!("running {:?}", cfg.command);
    match cfg.command {
        Command::Estimate => commands::cmd_estimate(&cfg),
        Command::Analyze => commands::cmd_analyze(&cfg),
        Command::Flow => commands::cmd_flow(&cfg),
        Command::Selftest => selftest::cmd_selftest(&cfg.tol),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.opts.verbose);
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("{}", e.to_json());
        EXIT_ERROR
    });
    ExitCode::from(code as u8)
}
