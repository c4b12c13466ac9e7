//! File formats, subcommands and the maintainer workflow report for the
//! `spectradiag` command-line tool.

pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod workflow;

use std::io::Write;

use clap::Parser;

pub use error::{CliError, CliResult};

/// Parses arguments, runs one subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&parsed) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(c: &cli::Cli) -> CliResult<()> {
    let run = || commands::run(&c.command, c.common.seed);
    let out = match c.common.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    match &c.common.out {
        Some(p) => io::write_bytes(p, &out.primary)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&out.primary)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    if let Some(p) = &c.common.csv {
        match &out.csv {
            Some(bytes) => io::write_bytes(p, bytes)?,
            None => eprintln!("note: this command has no CSV plot data"),
        }
    }
    if !c.common.quiet {
        eprint!("{}", out.summary);
    }
    Ok(())
}
