//! kanai-cavity: runs resonator scenarios from a TOML config and writes
//! CSV data, JSON reports and binary field snapshots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::commands::Command;
use crate::config::Scenario;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kanai-cavity", version, about = "Damped quantum oscillator in a resonator with moving mirrors")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML, schema_version = 1).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides outputs.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    jobs: Option<usize>,
}

fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    let scenario = Scenario::load(&cli.config)?;
    let outputs = commands::run(cli.command, &scenario)?;
    let names = outputs.names().map(str::to_owned).collect();
    outputs.commit(&scenario.output_dir(cli.out.as_deref()))?;
    Ok(names)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(names) => {
            for n in names {
                println!("wrote {n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
