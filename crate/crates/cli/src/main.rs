mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::config::RunConfig;
use crate::error::CliError;

/// Runs one invocation and returns its exit status: 0 on success, 1 for
/// input and data errors, 2 for infrastructure failures.
fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            return report(&CliError::Usage(
                e.render().to_string().trim_end().to_string(),
            ))
        }
    };
    let outcome =
        RunConfig::resolve(&cli.run).and_then(|config| commands::dispatch(cli.command, &config));
    match outcome {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(error: &CliError) -> u8 {
    eprintln!("{}", error.to_json());
    error.exit_code()
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
