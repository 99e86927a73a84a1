//! `cfhj`: command-line front end for the HJ solver, the validation suites
//! and parameter sweeps.
//!
//! ```text
//! cfhj solve-hj m=0.4 scheme=cutoff n=64 L=20 N=2001 t_end=2 times=0.5,1 out=run
//! cfhj validate <invariants|crossval|shocks|equilibrium|longtime|bernstein|all> [N=..]
//! cfhj sweep param=n values=16,32,64 m=0.4 t_end=1 out=sweep_dir
//! ```
//!
//! Exit codes: 0 success, 1 failed check, 2 bad configuration, 3 runtime
//! failure (invariant breach, stability violation, I/O).

mod commands;
mod config;

use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Core(#[from] cfhj::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cfhj::Error as E;
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidGrid(_)
                | E::InvalidParameter(_)
                | E::InvalidDensity { .. }
                | E::Parse(_)
                | E::IncompatibleInitialData { .. } => 2,
                _ => 3,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(cfhj::Error::Io(e))
    }
}

const USAGE: &str = "usage: cfhj <solve-hj|validate|sweep> [args] [key=value ...] [config=file]";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match args.first().map(String::as_str) {
        Some("solve-hj") => commands::solve_hj(&args[1..]),
        Some("validate") => commands::validate(&args[1..]),
        Some("sweep") => commands::sweep(&args[1..]),
        Some("-h" | "--help" | "help") => {
            println!("{USAGE}");
            Ok(())
        }
        Some(other) => Err(CliError::Config(format!("unknown command `{other}`\n{USAGE}"))),
        None => Err(CliError::Config(USAGE.to_string())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfhj: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
