use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pg_bandit::config::read_raw;
use pg_bandit::{parallelism_from_env, run_command, CliError, Command, RawConfig, VerifyPlan};

/// Softmax policy gradient on stochastic bandits: simulate, summarize, verify.
#[derive(Debug, Parser)]
#[command(name = "pg-bandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset; file keys override its values.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of runs in a batch.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Logit snapshot stride.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Confidence parameter of the good event.
    #[arg(long, global = true)]
    delta: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate one episode and write trajectory.csv.
    Run,
    /// Simulate a batch and write batch.csv and summary.csv.
    Batch,
    /// Run the verification suite; exits nonzero if any check fails.
    Verify,
    /// Run a batch from a named preset.
    Preset { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let flags = RawConfig {
        preset: match &cli.command {
            Sub::Preset { name } => Some(name.clone()),
            _ => cli.preset.clone(),
        },
        seed: cli.seed,
        m: cli.runs,
        out: cli.out.clone(),
        stride: cli.stride,
        delta: cli.delta,
        ..Default::default()
    };
    let parallelism = parallelism_from_env()?;

    if let Sub::Verify = cli.command {
        let seed = cli.seed.unwrap_or(0);
        let mut plan = VerifyPlan::full(seed);
        if let Some(m) = cli.runs {
            plan.theorem_runs = m;
        }
        let config = RawConfig {
            preset: Some("theorem-regime".into()),
            ..Default::default()
        }
        .merge(RawConfig {
            out: cli.out,
            ..Default::default()
        })
        .resolve()?;
        let outcome = run_command(&config, &Command::Verify(plan), parallelism)?;
        for f in &outcome.failures {
            eprintln!("{f}");
        }
        for path in &outcome.files {
            println!("{}", path.display());
        }
        return Ok(outcome.success());
    }

    let raw = match &cli.config {
        Some(path) => read_raw(path)?,
        None => RawConfig::default(),
    };
    let config = raw.merge(flags).resolve()?;
    let command = match cli.command {
        Sub::Run => Command::Run,
        _ => Command::Batch,
    };
    let outcome = run_command(&config, &command, parallelism)?;
    for path in &outcome.files {
        println!("{}", path.display());
    }
    Ok(true)
}
