use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::builder::PossibleValuesParser;
use clap::Parser;
use magspec::config::ScenarioConfig;
use magspec::runner::{run, Command};
use magspec::Error;
use serde::Serialize;

/// Semiclassical spectral checks for magnetic Schrödinger operators.
#[derive(Debug, Parser)]
#[command(name = "magspec", version)]
struct Cli {
    /// What to run.
    #[arg(value_parser = PossibleValuesParser::new(Command::ALL.map(|c| c.name())))]
    command: String,
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overrides `[solver] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct Failure {
    error: String,
    messages: Vec<String>,
}

fn load(cli: &Cli) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_path(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.solver.eigs.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        magspec::par::init_threads(n).context("setting up the thread pool")?;
    }
    let cfg = load(cli)?;
    let cmd: Command = cli.command.parse()?;
    let outcome = run(cmd, &cfg)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    Ok(outcome.success())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let messages = match e.downcast_ref::<Error>() {
                Some(Error::Config(m)) => m.clone(),
                _ => e.chain().map(|c| c.to_string()).collect(),
            };
            let f = Failure {
                error: e.to_string().lines().next().unwrap_or_default().to_string(),
                messages,
            };
            println!(
                "{}",
                serde_json::to_string(&f).unwrap_or_else(|_| format!("{{\"error\":{:?}}}", e.to_string()))
            );
            ExitCode::from(1)
        }
    }
}
