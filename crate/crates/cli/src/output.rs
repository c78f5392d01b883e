//! CSV artifacts with a `#` metadata header, plus gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pg_bandit_core::engine::RunMetadata;
use pg_bandit_core::{BatchResult, Trajectory};

use crate::config::ExperimentConfig;
use crate::summary::BatchSummary;
use crate::verify::CheckResult;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRAJECTORY_COLUMNS: &str =
    "t,action,reward,pi_star,theta_star,inst_regret,cum_expected_regret,\
cum_pseudo_regret,min_logit,pair_margin,g_event";
pub const BATCH_COLUMNS: &str =
    "run_index,seed,final_pseudo_regret,final_expected_regret,min_min_logit,min_pair_margin,tau";
pub const SUMMARY_COLUMNS: &str = "metric,t,value";
pub const CHECKPOINT_COLUMNS: &str =
    "t,pseudo_mean,pseudo_median,pseudo_p95,pseudo_std,expected_mean,expected_median,expected_p95,expected_std";
pub const VERIFY_COLUMNS: &str = "check_name,kind,value,threshold,pass";

/// Shortest round-trip form; exponent notation for very small or large values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Header lines shared by every artifact.
pub fn metadata_block(config: &ExperimentConfig, meta: &RunMetadata) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# artifact: pg-bandit {ARTIFACT_VERSION}");
    let _ = writeln!(s, "# rng: {}", meta.rng);
    let _ = writeln!(s, "# log: natural");
    let _ = writeln!(s, "# delta: {}", num(meta.delta));
    let _ = writeln!(s, "# log_term: {}", num(meta.log_term));
    let _ = writeln!(s, "# eta_resolved: {}", meta.rate.describe());
    let _ = writeln!(s, "# theorem_rate: {}", num(meta.theorem_rate));
    for (key, value) in config.echo() {
        let _ = writeln!(s, "# config.{key}: {value}");
    }
    s
}

pub fn trajectory_csv(config: &ExperimentConfig, traj: &Trajectory) -> String {
    let mut s = metadata_block(config, &traj.meta);
    let _ = writeln!(s, "# run_seed: {}", traj.seed);
    s.push_str(TRAJECTORY_COLUMNS);
    s.push('\n');
    for r in &traj.steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.action + 1,
            num(r.reward),
            num(r.pi_star),
            num(r.theta_star),
            num(r.inst_regret),
            num(r.cum_expected_regret),
            num(r.cum_pseudo_regret),
            num(r.min_logit),
            num(r.pair_margin),
            r.g_event
        );
    }
    s
}

/// Strided logit snapshots, one column per arm in user order.
pub fn snapshots_csv(config: &ExperimentConfig, traj: &Trajectory) -> String {
    let mut s = metadata_block(config, &traj.meta);
    let _ = writeln!(s, "# run_seed: {}", traj.seed);
    let _ = writeln!(s, "# stride: {}", traj.stride);
    s.push('t');
    for a in 1..=config.k() {
        let _ = write!(s, ",theta_{a}");
    }
    s.push('\n');
    for snap in &traj.snapshots {
        s.push_str(&snap.t.to_string());
        for x in &snap.theta {
            s.push(',');
            s.push_str(&num(*x));
        }
        s.push('\n');
    }
    s
}

pub fn batch_csv(config: &ExperimentConfig, batch: &BatchResult) -> String {
    let mut s = metadata_block(config, &batch.meta);
    let _ = writeln!(s, "# base_seed: {}", batch.base_seed);
    s.push_str(BATCH_COLUMNS);
    s.push('\n');
    for r in &batch.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.run_index,
            r.seed,
            num(r.final_pseudo_regret),
            num(r.final_expected_regret),
            num(r.min_min_logit),
            num(r.min_pair_margin),
            r.tau
        );
    }
    s
}

pub fn checkpoints_csv(config: &ExperimentConfig, batch: &BatchResult) -> String {
    let mut s = metadata_block(config, &batch.meta);
    s.push_str(CHECKPOINT_COLUMNS);
    s.push('\n');
    for a in &batch.aggregates {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            a.t,
            num(a.pseudo.mean),
            num(a.pseudo.median),
            num(a.pseudo.p95),
            num(a.pseudo.std),
            num(a.expected.mean),
            num(a.expected.median),
            num(a.expected.p95),
            num(a.expected.std)
        );
    }
    s
}

/// Long format: one `metric,t,value` row per number; `t` is empty for
/// metrics not tied to a checkpoint.
pub fn summary_csv(
    config: &ExperimentConfig,
    batch: &BatchResult,
    summary: &BatchSummary,
) -> String {
    let mut s = metadata_block(config, &batch.meta);
    s.push_str(SUMMARY_COLUMNS);
    s.push('\n');
    let mut row = |metric: &str, t: Option<u64>, value: String| {
        let t = t.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{metric},{t},{value}");
    };
    row("runs", None, summary.runs.to_string());
    for a in &summary.checkpoints {
        for (name, d) in [
            ("pseudo_regret", &a.pseudo),
            ("expected_regret", &a.expected),
        ] {
            row(&format!("{name}.mean"), Some(a.t), num(d.mean));
            row(&format!("{name}.median"), Some(a.t), num(d.median));
            row(&format!("{name}.p95"), Some(a.t), num(d.p95));
        }
    }
    let b = &summary.bounds;
    row(
        "bound.empirical_mean_regret",
        Some(batch.n),
        num(b.empirical_mean_regret),
    );
    row(
        "bound.refined_shape",
        Some(batch.n),
        num(b.refined_bound_shape),
    );
    row(
        "bound.coarse_shape",
        Some(batch.n),
        num(b.coarse_bound_shape),
    );
    row("bound.refined_ratio", Some(batch.n), num(b.refined_ratio));
    row("bound.coarse_ratio", Some(batch.n), num(b.coarse_ratio));
    for e in &summary.events {
        let name = e.event.name();
        row(&format!("event.{name}.count"), None, e.count.to_string());
        row(&format!("event.{name}.rate"), None, num(e.rate));
        row(&format!("event.{name}.wilson_lo"), None, num(e.wilson_lo));
        row(&format!("event.{name}.wilson_hi"), None, num(e.wilson_hi));
        row(&format!("event.{name}.ceiling"), None, num(e.ceiling));
        row(
            &format!("event.{name}.within_ceiling"),
            None,
            e.within_ceiling().to_string(),
        );
    }
    row(
        "sublinearity.indicator",
        None,
        num(summary.sublinearity_indicator),
    );
    row(
        "sublinearity.fraction_second_half_smaller",
        None,
        num(summary.fraction_second_half_smaller),
    );
    row("lemma3.failures", None, summary.lemma3_failures.to_string());
    row(
        "lemma3.in_event_steps",
        None,
        summary.in_event_steps.to_string(),
    );
    row(
        "conservation.max_abs_logit_sum",
        None,
        num(summary.max_abs_logit_sum),
    );
    row(
        "increments.max_ratio_to_eta",
        None,
        num(summary.max_increment_ratio),
    );
    s
}

pub fn verify_report_csv(checks: &[CheckResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# artifact: pg-bandit {ARTIFACT_VERSION}");
    s.push_str(VERIFY_COLUMNS);
    s.push('\n');
    for c in checks {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.name,
            c.kind,
            num(c.value),
            num(c.threshold),
            c.pass
        );
    }
    s
}

/// Regret curves for a single run from `trajectory.csv`.
pub fn trajectory_gnuplot() -> String {
    "set datafile separator ','\n\
     set key left top\n\
     set xlabel 't'\n\
     set ylabel 'cumulative regret'\n\
     plot 'trajectory.csv' using 1:8 with lines title 'pseudo-regret', \\\n\
     \x20    'trajectory.csv' using 1:7 with lines title 'expected regret'\n"
        .to_string()
}

/// Mean and p95 regret at the checkpoints from `checkpoints.csv`.
pub fn batch_gnuplot() -> String {
    "set datafile separator ','\n\
     set key left top\n\
     set xlabel 't'\n\
     set ylabel 'cumulative regret'\n\
     plot 'checkpoints.csv' using 1:2 with linespoints title 'mean pseudo-regret', \\\n\
     \x20    'checkpoints.csv' using 1:4 with linespoints title 'p95 pseudo-regret', \\\n\
     \x20    'checkpoints.csv' using 1:6 with linespoints title 'mean expected regret'\n"
        .to_string()
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}
