//! Configuration, presets, CSV artifacts and the verification suite for the
//! `pg-bandit` experiment runner.

pub mod config;
pub mod output;
pub mod presets;
pub mod summary;
pub mod verify;

use std::path::{Path, PathBuf};

use pg_bandit_core::Parallelism;

pub use config::{
    parse_config, parse_config_str, ConfigError, ExperimentConfig, RawConfig, Regime,
};
pub use presets::Preset;
pub use summary::{summarize_batch, BatchSummary, BoundComparison};
pub use verify::{run_suite, CheckKind, CheckResult, VerifyPlan};

/// Environment variable capping batch parallelism; `0` means automatic.
pub const THREADS_ENV: &str = "PG_BANDIT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] pg_bandit_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{THREADS_ENV} must be a non-negative integer, got `{0}`")]
    Threads(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    /// One episode with the configured base seed.
    Run,
    /// `m` runs with per-run seeds derived from the base seed.
    Batch,
    /// The full verification suite.
    Verify(VerifyPlan),
}

/// Files written by a command and, for `verify`, the failed checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub failures: Vec<CheckResult>,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Reads [`THREADS_ENV`].
pub fn parallelism_from_env() -> Result<Parallelism, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(Parallelism::Auto),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(Parallelism::Auto),
            Ok(n) => Ok(Parallelism::Threads(n)),
            Err(_) => Err(CliError::Threads(v)),
        },
    }
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = output::write_artifact(dir, name, contents).map_err(|source| CliError::Io {
        path: dir.join(name),
        source,
    })?;
    files.push(path);
    Ok(())
}

pub fn run_command(
    config: &ExperimentConfig,
    command: &Command,
    parallelism: Parallelism,
) -> Result<Outcome, CliError> {
    let dir = config.out.as_path();
    let mut outcome = Outcome::default();
    match command {
        Command::Run => {
            let traj = config.experiment()?.run_episode(config.seed)?;
            write(
                dir,
                "trajectory.csv",
                &output::trajectory_csv(config, &traj),
                &mut outcome.files,
            )?;
            write(
                dir,
                "snapshots.csv",
                &output::snapshots_csv(config, &traj),
                &mut outcome.files,
            )?;
            write(
                dir,
                "regret.gp",
                &output::trajectory_gnuplot(),
                &mut outcome.files,
            )?;
        }
        Command::Batch => {
            let batch = config
                .experiment()?
                .run_batch(config.seed, config.runs, parallelism)?;
            let summary = summarize_batch(&batch, config)?;
            write(
                dir,
                "batch.csv",
                &output::batch_csv(config, &batch),
                &mut outcome.files,
            )?;
            write(
                dir,
                "summary.csv",
                &output::summary_csv(config, &batch, &summary),
                &mut outcome.files,
            )?;
            write(
                dir,
                "checkpoints.csv",
                &output::checkpoints_csv(config, &batch),
                &mut outcome.files,
            )?;
            write(
                dir,
                "regret.gp",
                &output::batch_gnuplot(),
                &mut outcome.files,
            )?;
        }
        Command::Verify(plan) => {
            let plan = VerifyPlan {
                parallelism,
                ..plan.clone()
            };
            let checks = run_suite(&plan)?;
            write(
                dir,
                "verify_report.csv",
                &output::verify_report_csv(&checks),
                &mut outcome.files,
            )?;
            outcome.failures = checks.into_iter().filter(|c| !c.pass).collect();
        }
    }
    Ok(outcome)
}
