//! Command-line front end: flag and config-file parsing plus the
//! subcommand drivers.

pub mod commands;
pub mod config;

use clap::Parser;

/// Exit status for a validation error in flags or config.
pub const EXIT_INVALID: i32 = 1;
/// Exit status for a failure while running.
pub const EXIT_RUNTIME: i32 = 2;

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match config::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match config::parse_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    match commands::run(cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
