//! Command-line front end for `fracld`.
//!
//! Every subcommand is a pure function of its arguments: results depend on
//! `--seed` but never on `--workers`, and every report carries the resolved
//! configuration it was produced with.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use config::{Cli, Command, ExperimentConfig, Format, DEFAULT_SEED};

/// Exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const REGIME: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const INCONCLUSIVE: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] fracld::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use fracld::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) => exit::FAILURE,
            CliError::Core(e) => match e {
                E::Regime(_) => exit::REGIME,
                E::NonPsd { .. } => exit::NUMERIC,
                E::Domain(_) | E::SizeLimit(_) | E::Membership(_) | E::Format(_) => exit::USAGE,
                E::Io(_) => exit::FAILURE,
            },
        }
    }
}

/// Runs the command line `argv` (including the program name) against the
/// process's standard streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output and diagnostic streams.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    // output is buffered so the worker pool never touches `out`
    let mut buf = Vec::new();
    let result = match cli.command.common().workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli.command, &mut buf)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} workers: {e}"))),
        },
        None => commands::dispatch(&cli.command, &mut buf),
    };
    if let Err(e) = out.write_all(&buf).and_then(|()| out.flush()) {
        let _ = writeln!(err, "error: {e}");
        return exit::FAILURE;
    }
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
