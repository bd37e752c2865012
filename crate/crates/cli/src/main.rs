//! `qcorr`: command-line frontend for the correlation-measure toolkit.
//!
//! Exit codes: 0 success, 1 theorem-tier violation, 2 usage error,
//! 3 validation or limit error.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use qcorr::Error;

#[derive(Parser, Debug)]
#[command(name = "qcorr", version, about = "Multipartite correlation measures and recoverability checks")]
struct Cli {
    #[command(flatten)]
    global: config::GlobalOpts,
    #[command(subcommand)]
    command: commands::Command,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownCheck(_) | Error::Parse(_) | Error::UnknownName(_) | Error::Io(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.global.resolve().and_then(|cfg| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| Error::OptimizerFailure(format!("worker pool: {e}")))?;
        commands::run(&cli.command, &cfg)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
