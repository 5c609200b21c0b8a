//! The `atlas` command line tool: corpus generation, featurization,
//! classifier training, embedding extraction, and the evaluation metrics,
//! each as one subcommand. Reports go to stdout; artifacts go to `--out`
//! paths.

pub mod cli;
pub mod commands;
pub mod logging;
pub mod pipeline;
pub mod report;

use std::process::ExitCode;

use clap::Parser;

/// Entry point shared by `main` and the integration tests.
pub fn run() -> ExitCode {
    let cli = cli::Cli::parse();
    logging::init_from_env();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
