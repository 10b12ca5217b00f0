use std::process::ExitCode;

use clap::Parser;
use simbench_tool::{execute, Cli, CONFIG_ENV};

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    match execute(cli, std::env::var_os(CONFIG_ENV)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simbench: {e:#}");
            ExitCode::FAILURE
        }
    }
}
