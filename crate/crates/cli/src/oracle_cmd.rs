use std::io::{stdin, stdout, BufReader};
use std::net::TcpListener;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use blocksense::seqsens::protocol::{
    check_connection, check_transcript, format_transcript, parse_transcript, serve, serve_tcp, ConformanceReport,
    Connection, Fault, MockConfig,
};

use crate::output::write_atomic;
use crate::ProtocolFailure;

#[derive(clap::Args, Debug)]
#[command(group = clap::ArgGroup::new("endpoint").required(true))]
pub struct CheckArgs {
    /// Spawn this shell command and talk over its standard streams.
    #[arg(long, group = "endpoint")]
    cmd: Option<String>,
    /// Connect to host:port.
    #[arg(long, group = "endpoint")]
    tcp: Option<String>,
    /// Check the built-in mock in process.
    #[arg(long, group = "endpoint")]
    mock: bool,
    /// Validate a recorded transcript instead of a live endpoint.
    #[arg(long, group = "endpoint")]
    transcript: Option<PathBuf>,
    /// Misbehaviour for --mock.
    #[arg(long, requires = "mock", default_value = "none")]
    fault: Fault,
    /// Save the live session's transcript here.
    #[arg(long, conflicts_with = "transcript")]
    record: Option<PathBuf>,
    /// Seconds to wait for each reply.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args, Debug)]
pub struct MockArgs {
    #[arg(long, default_value = "none")]
    fault: Fault,
    /// Listen on host:port instead of the standard streams.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long, default_value_t = 1)]
    classes: usize,
}

fn print_report(report: &ConformanceReport, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(report)?);
        return Ok(());
    }
    for (i, v) in report.violations.iter().enumerate() {
        println!("violation {}: [{}] {}", i + 1, v.check, v.detail);
        if let Some(p) = &v.payload {
            println!("    payload: {p}");
        }
    }
    println!(
        "{} {}: {} checks passed, {} violations, {} exchanges",
        if report.passed() { "PASS" } else { "FAIL" },
        report.endpoint,
        report.passed_checks,
        report.violations.len(),
        report.exchanges
    );
    Ok(())
}

pub fn check(a: CheckArgs) -> Result<()> {
    let report = if let Some(path) = &a.transcript {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        check_transcript(&path.display().to_string(), &parse_transcript(&text)?)
    } else {
        let conn = if let Some(cmd) = &a.cmd {
            Connection::spawn(cmd)?
        } else if let Some(addr) = &a.tcp {
            Connection::connect_tcp(addr)?
        } else {
            Connection::in_process(MockConfig {
                fault: a.fault,
                ..MockConfig::default()
            })?
        };
        let mut conn = conn.with_timeout(Duration::from_secs(a.timeout));
        let report = check_connection(&mut conn);
        if let Some(p) = &a.record {
            write_atomic(p, format_transcript(conn.transcript()).as_bytes())?;
        }
        report
    };
    print_report(&report, a.json)?;
    if !report.passed() {
        return Err(ProtocolFailure(format!("{} protocol violation(s)", report.violations.len())).into());
    }
    Ok(())
}

pub fn serve_mock(a: MockArgs) -> Result<()> {
    let cfg = MockConfig {
        fault: a.fault,
        num_classes: a.classes,
        ..MockConfig::default()
    };
    match &a.listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(listener, &cfg)?;
        }
        None => serve(BufReader::new(stdin().lock()), stdout().lock(), &cfg)?,
    }
    Ok(())
}
