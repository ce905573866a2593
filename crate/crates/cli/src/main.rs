//! `privrelease` command-line entry point.
//!
//! Exit codes: 0 success, 1 oracle disagreement, 2 configuration error,
//! 3 numeric failure, 4 I/O failure.

mod args;
mod commands;
mod defaults;

use std::process::ExitCode;

use clap::Parser;
use privrelease_core::{Error, ErrorKind};
use thiserror::Error;

use crate::args::{apply_config_file, Cli};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle check failed: {0}")]
    Disagreement(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Disagreement(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 4,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Numeric => 3,
                ErrorKind::Io => 4,
            },
        }
    }
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    let result = (|| {
        if let Some(path) = &cli.config {
            apply_config_file(&mut cli.command, path)?;
        }
        commands::run(cli.command, cli.config.as_deref())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
