//! `sanim` command-line driver.
//!
//! Exit codes: 0 on success, 1 on internal or output failures, 2 on usage,
//! parse or input errors.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Context attached to failures while writing results.
#[derive(Debug)]
pub struct OutputError(pub std::path::PathBuf);

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot write {}", self.0.display())
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<OutputError>().is_some() {
        return 1;
    }
    if let Some(e) = err.downcast_ref::<sanim::Error>() {
        return match e {
            sanim::Error::MemoryBudgetExceeded { .. } | sanim::Error::Stream(_) => 1,
            _ => 2,
        };
    }
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
