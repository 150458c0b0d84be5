//! `seminmt`: command-line pipelines for semi-supervised translation.
//!
//! Exit status: 0 success, 2 usage or configuration error, 3 data error
//! (missing or malformed files), 4 numerical failure, 5 checkpoint that does
//! not match the given vocabularies. Failures print one line to stderr:
//! `error code=<n> kind=<name> message="<text>"`.

mod commands;

use std::process::ExitCode;

use clap::Parser;
use seminmt::error::ErrorKind;
use seminmt::Error;

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
        ErrorKind::Mismatch => 5,
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ")
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_owned();
            eprintln!("error code=2 kind=usage message=\"{}\"", escape(&first));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error code={code} kind={} message=\"{}\"", e.name(), escape(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
