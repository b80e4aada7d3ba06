//! `blocksense` command line.

mod boolfn_cmd;
mod bound_cmd;
mod config;
mod estimate_cmd;
mod oracle_cmd;
mod output;
mod report_cmd;
mod rnnlab_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Failure that maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ProtocolFailure(pub String);

#[derive(Parser, Debug)]
#[command(name = "blocksense", version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("CARGO_PKG_NAME"), ")"))]
#[command(about = "Block sensitivity of Boolean functions, sequence tasks and small networks")]
struct Cli {
    /// Worker threads; 1 is the reference schedule.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON file with one object per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact sensitivity measures of a truth table.
    Boolfn(boolfn_cmd::Args),
    /// Estimate block sensitivity over a dataset.
    Estimate(estimate_cmd::Args),
    /// Certify the k-gram averaging bound on random models.
    VerifyBound(bound_cmd::Args),
    /// LSTM experiments.
    Rnnlab {
        #[command(subcommand)]
        command: rnnlab_cmd::Command,
    },
    /// Run the wire-protocol conformance suite.
    OracleCheck(oracle_cmd::CheckArgs),
    /// Summarize report files.
    Report(report_cmd::Args),
    /// Serve the built-in mock oracle.
    #[command(hide = true)]
    MockOracle(oracle_cmd::MockArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let file = config::ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Boolfn(a) => boolfn_cmd::run(a),
        Command::Estimate(a) => estimate_cmd::run(a, &file),
        Command::VerifyBound(a) => bound_cmd::run(a, &file),
        Command::Rnnlab { command } => rnnlab_cmd::run(command, &file),
        Command::OracleCheck(a) => oracle_cmd::check(a),
        Command::Report(a) => report_cmd::run(a),
        Command::MockOracle(a) => oracle_cmd::serve_mock(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let protocol = err.chain().any(|e| {
        e.downcast_ref::<ProtocolFailure>().is_some()
            || e.downcast_ref::<blocksense::Error>()
                .is_some_and(blocksense::Error::is_protocol_violation)
    });
    if protocol {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
