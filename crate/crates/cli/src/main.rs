//! `fairaudit`: subgroup disparity audits, bias probes and adversarial
//! debiasing demos from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 oracle or runtime failure.

mod audit_cmd;
mod error;
mod grl_cmd;
mod output;
mod probe_cmd;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "fairaudit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bootstrapped subgroup gaps for every task, with summaries.
    Audit(audit_cmd::AuditArgs),
    /// Merge subsequence probabilities into note probabilities.
    Merge(audit_cmd::MergeArgs),
    /// Log-probability bias scores per template topic.
    Probe(probe_cmd::ProbeArgs),
    /// Top-k completions for a masked text.
    Fill(probe_cmd::FillArgs),
    /// Gradient-reversal training on synthetic data.
    GrlDemo(grl_cmd::GrlDemoArgs),
    /// Merge gap CSV files into one Markdown table.
    Report(audit_cmd::ReportArgs),
    /// Write the synthetic audit cohort.
    GenCohort(audit_cmd::GenCohortArgs),
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Audit(a) => audit_cmd::audit(a),
        Command::Merge(a) => audit_cmd::merge(a),
        Command::Probe(a) => probe_cmd::probe(a),
        Command::Fill(a) => probe_cmd::fill(a),
        Command::GrlDemo(a) => grl_cmd::grl_demo(a),
        Command::Report(a) => audit_cmd::report(a),
        Command::GenCohort(a) => audit_cmd::gen_cohort_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
