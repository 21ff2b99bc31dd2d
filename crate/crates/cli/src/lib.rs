//! `fairlab` command-line front end.
//!
//! Exit codes: 0 success, 1 computational failure (divergence, solver
//! failure, bound violations), 2 usage or input error.

pub mod args;
mod data;
mod fed_cmd;
pub mod manifest;
mod oracle_cmd;
pub mod output;
mod report_cmd;
mod train_cmd;

pub use args::{Cli, Command};

/// Version stamped into every metrics file; `report` refuses other values.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
    pub fn compute(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<fairlab::Error> for CliError {
    fn from(e: fairlab::Error) -> Self {
        use fairlab::Error::*;
        match e {
            SchemaError(_) | ParseError { .. } | Io(_) | InsufficientData(_) | InvalidParams(_) | InvalidInput(_)
            | InvalidBandwidth(_) | UnsupportedKind(_) | InvalidPerturbation(_) => Self::usage(e.to_string()),
            _ => Self::compute(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(format!("json error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Caps the global rayon pool at `FAIRLAB_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("FAIRLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("FAIRLAB_THREADS must be a positive integer, got '{v}'")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one command and returns its exit code.
pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::OracleVerify(a) => oracle_cmd::run(&a),
        Command::Train(a) => train_cmd::run(&a),
        Command::Fedsim(a) => fed_cmd::run(&a),
        Command::Report(a) => report_cmd::run(&a),
    }
}
