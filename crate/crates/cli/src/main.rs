//! `curate`: batch front end for corpus curation and mixture planning.
//!
//! Exit codes: 0 success, 1 validation failure, 2 IO, parse or usage failure.

mod cmd;
mod io;

use std::process::ExitCode;

use clap::Parser;

use cmd::{Command, Ctx};

#[derive(Debug, Parser)]
#[command(name = "curate", version, about = "Corpus curation and pretraining-mixture planning")]
pub struct Cli {
    /// Worker threads for parallel stages. Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed; every random choice derives from it by name.
    #[arg(long, global = true, env = "CURATE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

/// Marks a failure that exits with status 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<curate::Error>() {
            return match e {
                curate::Error::Config(_) | curate::Error::Training(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Ctx { seed: cli.seed };
    match cmd::dispatch(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
