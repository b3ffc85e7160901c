//! Batch driver: parses an experiment configuration, runs the requested
//! suite and writes JSON/CSV reports.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

pub use config::{CaseSelection, Cli, Command, ExperimentConfig, Suite};
pub use report::{write_report, Format, ReportError, ReportHeader};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("computation failed: {0}")]
    Computation(String),
}

impl CliError {
    pub fn exit_status(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Report(ReportError::Io { .. }) => 3,
            CliError::Report(_) | CliError::Computation(_) => 1,
        }
    }
}

/// What a run printed and wrote, and the first failing asserted record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    pub failure: Option<String>,
}

impl RunSummary {
    pub fn exit_status(&self) -> i32 {
        if self.failure.is_some() {
            1
        } else {
            0
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    commands::dispatch(config)
}

/// Parses `args`, runs, prints, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = ExperimentConfig::from_cli(cli).and_then(|config| run(&config));
    match outcome {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            if let Some(failure) = &summary.failure {
                eprintln!("assertion failed: {failure}");
            }
            summary.exit_status()
        }
        Err(e) => {
            eprintln!("apriori: {e}");
            e.exit_status()
        }
    }
}
