//! Command-line front end over `jsqps-core`.
//!
//! Exit codes: 0 success, 1 parameter error (including unstable systems and
//! malformed flags or config files), 2 numerical failure (including
//! percentile saturation), 3 resource-guard trips.

mod commands;
mod spec;

use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "jsqps",
    version,
    about = "Sojourn-time analysis for M/M/R-JSQ-PS clusters"
)]
struct Cli {
    #[command(subcommand)]
    command: spec::Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        // Usage mistakes are parameter errors; clap's default code of 2 is
        // reserved for numerical failures here.
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
