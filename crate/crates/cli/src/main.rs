use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod output;

use args::{Cli, Command};

/// Failure modes that end a run with exit code 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Format(String),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<memloss::Error> for CliError {
    fn from(e: memloss::Error) -> Self {
        match e {
            memloss::Error::Format(m) => CliError::Format(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => f.write_str(m),
            CliError::Format(m) => write!(f, "format error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MEMLOSS_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("config error: MEMLOSS_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("config error: thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Tails(a) => commands::tails(a),
        Command::Evolve(a) => commands::evolve(a),
        Command::Memloss(a) => commands::memloss(a),
        Command::Mixing(a) => commands::mixing(a),
        Command::Coupling(a) => commands::coupling(a),
        Command::Frequency(a) => commands::frequency(a),
        Command::Summarize(a) => commands::summarize(a),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("expectation gate failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
