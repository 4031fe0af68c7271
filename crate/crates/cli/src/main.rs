use std::io::Read;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use nclp_cli::{render, run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<i32> {
    let config = RunConfig::from_args(&cli.run)?;
    let input = match &cli.run.input {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("cannot read stdin")?;
            s
        }
    };
    let outcome = run(cli.command, &input, &config)?;
    let text = render(&outcome.report)?;
    match &cli.run.out {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    for line in &outcome.summary {
        eprintln!("{line}");
    }
    Ok(outcome.report.outcome.exit_code())
}
