//! Command-line front end for the `markovlm` library. Each subcommand
//! lives in [`commands`]; [`run`] dispatches and returns the exit code.

pub mod args;
pub mod commands;
pub mod error;
pub mod format;

use std::io::Write;

pub use args::{Cli, Command};
pub use error::{exit, CliError};

/// Runs one parsed command. Errors are returned, not printed.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, CliError> {
    let code = match &cli.command {
        Command::Train(a) => commands::train(a, out)?,
        Command::Generate(a) => commands::generate(a, out, err)?,
        Command::Inspect(a) => commands::inspect(a, out, err)?,
        Command::Analyze(a) => commands::analyze(a, out, err)?,
        Command::Eval(a) => commands::eval(a, out, err)?,
        Command::Chain(a) => commands::chain(a, out, err)?,
    };
    out.flush()?;
    Ok(code)
}
