//! Command-line front end: loads a model document, computes bounds, runs the
//! finite-state oracles or Monte Carlo, and writes a JSON or CSV report.

pub mod args;
pub mod commands;
pub mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::Context;

use args::{Cli, Command, Format};
use report::Report;

pub use commands::Outcome;

/// Runs one command and writes its report; returns the exit code.
pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    let (outcome, common) = match &cli.command {
        Command::Bounds(a) => (commands::cmd_bounds(a)?, &a.common),
        Command::Verify(a) => (commands::cmd_verify(a)?, &a.common),
        Command::Simulate(a) => (commands::cmd_simulate(a)?, &a.common),
    };
    match &common.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_report(&outcome.report, common.format, BufWriter::new(f))?;
        }
        None => write_report(&outcome.report, common.format, io::stdout().lock())?,
    }
    for v in outcome.report.failed_verdicts() {
        log::warn!("verdict {} failed (margin {:?})", v.name, v.margin);
    }
    Ok(outcome.code)
}

pub fn write_report<W: Write>(report: &Report, format: Format, mut out: W) -> anyhow::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["name", "status", "value", "reference", "margin", "detail"])?;
            let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for v in &report.verdicts {
                let status = serde_json::to_value(v.status)?;
                w.write_record([
                    v.name.as_str(),
                    status.as_str().unwrap_or_default(),
                    &num(v.value),
                    &num(v.reference),
                    &num(v.margin),
                    v.detail.as_deref().unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
