//! `idtsso`: parameter generation, protocol runs, the game suite and
//! benchmarks for the identity-transformation SSO simulator.
//!
//! Exit codes: 0 success, 2 usage error, 3 property-grid mismatch,
//! 4 internal error.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{Flags, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "idtsso", version, about = "Identity-transformation SSO simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Public parameters for one backend, or all of them.
    GenParams,
    /// Run logins and compare each account with the registry's table.
    RunFlow,
    /// Play the property-table games and compare with the expected grid.
    RunGames,
    /// Per-operation latencies for BL, OPR, UBL, sign and verify.
    Bench,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(anyhow::Error),
}

impl From<idtsso::Error> for CliError {
    fn from(e: idtsso::Error) -> Self {
        match e {
            idtsso::Error::Config(m) => CliError::Usage(m),
            other => CliError::Internal(other.into()),
        }
    }
}

const USAGE: u8 = 2;
const MISMATCH: u8 = 3;
const INTERNAL: u8 = 4;

fn version() -> Value {
    json!({"package": env!("CARGO_PKG_VERSION"), "source_hash": env!("IDTSSO_SOURCE_HASH")})
}

/// Pretty JSON with the config and version attached, to `--out` or stdout.
fn emit(mut doc: Value, c: &RunConfig) -> anyhow::Result<()> {
    doc["config"] = serde_json::to_value(c)?;
    doc["version"] = version();
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    match &c.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(command: Command, c: &RunConfig) -> Result<u8, CliError> {
    let (doc, mismatches) = match command {
        Command::GenParams => (commands::gen_params(c)?, 0),
        Command::RunFlow => (commands::run_flow(c)?, 0),
        Command::RunGames => commands::run_games(c)?,
        Command::Bench => (commands::bench(c)?, 0),
    };
    emit(doc, c).map_err(CliError::Internal)?;
    if mismatches > 0 {
        eprintln!("{mismatches} grid cell(s) differ from the expected table");
        return Ok(MISMATCH);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let result = cli.flags.resolve().and_then(|c| run(cli.command, &c));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(USAGE)
        }
        Err(CliError::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(INTERNAL)
        }
    }
}
