//! Command-line front end for camera-height scale recovery.
//!
//! Exit codes: 0 success, 2 invalid input, 3 no ground detected, 4 I/O.
//! Failures print `{"error": {"kind", "message", ...}}` on stderr.

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod scene_config;

pub use args::Cli;
pub use error::{CliError, CliResult};

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match commands::dispatch(cli.command) {
        Ok(()) => error::EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
