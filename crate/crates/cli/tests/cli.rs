use std::path::Path;
use std::process::{Command, Output};

use pg_bandit::output::{BATCH_COLUMNS, TRAJECTORY_COLUMNS, VERIFY_COLUMNS};
use pg_bandit::verify::VerifyPlan;
use pg_bandit::{run_command, Command as Cmd, RawConfig};
use pg_bandit_core::{derive_seed, Parallelism};

const CONFIG: &str = "\
means = [0.3, 0.9, 0.6]
n = 2000
eta = 0.05
m = 6
seed = 11
";

fn pg_bandit(args: &[&str], dir: &Path, threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pg-bandit"))
        .args(args)
        .current_dir(dir)
        .env("PG_BANDIT_THREADS", threads)
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn data(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(Result::unwrap).collect();
    (header, rows)
}

fn f(record: &csv::StringRecord, i: usize) -> f64 {
    record[i].parse().unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn run_writes_a_self_describing_trajectory() {
    let dir = setup();
    ok(pg_bandit(&["run", "--config", "exp.toml", "--out", "r", "--stride", "100"], dir.path(), "0"));
    let path = dir.path().join("r/trajectory.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    for key in ["# rng: xoshiro256**", "# log: natural", "# delta: ", "# eta_resolved: constant(5e-2)", "# artifact: "]
    {
        assert!(text.contains(key), "missing {key}");
    }
    let (header, rows) = data(&path);
    assert_eq!(header.join(","), TRAJECTORY_COLUMNS);
    assert_eq!(rows.len(), 2000);

    // pseudo-regret recomputed from the logged actions
    let means = [0.3, 0.9, 0.6];
    let (mut pseudo, mut expected) = (0.0, 0.0);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i + 1);
        let action: usize = r[1].parse().unwrap();
        assert!((1..=3).contains(&action));
        pseudo += 0.9 - means[action - 1];
        expected += f(r, 5);
        assert!((f(r, 7) - pseudo).abs() < 1e-9);
        assert!((f(r, 6) - expected).abs() < 1e-9);
        assert!(r[10] == *"true" || r[10] == *"false");
    }
    let (snap_header, snaps) = data(&dir.path().join("r/snapshots.csv"));
    assert_eq!(snap_header, ["t", "theta_1", "theta_2", "theta_3"]);
    assert_eq!(snaps.len(), 20);
    assert!(dir.path().join("r/regret.gp").exists());
}

#[test]
fn batch_outputs_are_bit_identical_across_invocations_and_threads() {
    let dir = setup();
    ok(pg_bandit(&["batch", "--config", "exp.toml", "--out", "a"], dir.path(), "1"));
    ok(pg_bandit(&["batch", "--config", "exp.toml", "--out", "b"], dir.path(), "3"));
    ok(pg_bandit(&["batch", "--config", "exp.toml", "--out", "c"], dir.path(), "0"));
    for name in ["batch.csv", "summary.csv", "checkpoints.csv", "regret.gp"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(name)).unwrap(), "{name}");
        assert_eq!(a, std::fs::read(dir.path().join("c").join(name)).unwrap(), "{name}");
    }
    let (header, rows) = data(&dir.path().join("a/batch.csv"));
    assert_eq!(header.join(","), BATCH_COLUMNS);
    assert_eq!(rows.len(), 6);
}

#[test]
fn summary_matches_recomputation_from_trajectories() {
    let dir = setup();
    ok(pg_bandit(&["batch", "--config", "exp.toml", "--out", "b"], dir.path(), "0"));
    let (_, batch) = data(&dir.path().join("b/batch.csv"));
    let mut finals = Vec::new();
    for (i, row) in batch.iter().enumerate() {
        let seed: u64 = row[1].parse().unwrap();
        assert_eq!(seed, derive_seed(11, i as u64));
        let out = format!("t{i}");
        ok(pg_bandit(&["run", "--config", "exp.toml", "--seed", &row[1], "--out", &out], dir.path(), "0"));
        let (_, steps) = data(&dir.path().join(&out).join("trajectory.csv"));
        let last = steps.last().unwrap();
        assert_eq!(last[7], row[2], "final pseudo-regret of run {i}");
        assert_eq!(last[6], row[3], "final expected regret of run {i}");
        let min_margin = steps.iter().map(|s| f(s, 9)).fold(f64::INFINITY, f64::min);
        assert_eq!(min_margin, f(row, 5));
        finals.push(f(last, 7));
    }
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let (_, summary) = data(&dir.path().join("b/summary.csv"));
    let reported = summary
        .iter()
        .find(|r| &r[0] == "pseudo_regret.mean" && &r[1] == "2000")
        .unwrap();
    assert!((f(reported, 2) - mean).abs() <= 1e-9 * mean.max(1.0));
}

#[test]
fn preset_subcommand_resolves_the_theorem_rate() {
    let dir = tempfile::tempdir().unwrap();
    ok(pg_bandit(&["preset", "theorem-regime", "--runs", "2", "--out", "p"], dir.path(), "0"));
    let text = std::fs::read_to_string(dir.path().join("p/batch.csv")).unwrap();
    let eta = 0.25 / (120.0 * 0.5 * 20_000f64.ln());
    assert!(text.contains(&format!("# eta_resolved: constant({eta:e})")), "{text}");
    assert!(text.contains("# config.regime: theorem"));

    ok(pg_bandit(&["batch", "--preset", "lower-bound-instance", "--runs", "1", "--out", "l"], dir.path(), "0"));
    let text = std::fs::read_to_string(dir.path().join("l/summary.csv")).unwrap();
    assert!(text.contains("# config.regime: EXPLORATORY"));
    assert!(text.contains("capped at 0.5"));
}

#[test]
fn errors_exit_with_status_two() {
    let dir = setup();
    let out = pg_bandit(&["preset", "no-such-preset"], dir.path(), "0");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    std::fs::write(dir.path().join("bad.toml"), CONFIG.replace("[0.3, 0.9, 0.6]", "[0.5, 0.5]")).unwrap();
    let out = pg_bandit(&["batch", "--config", "bad.toml"], dir.path(), "0");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`means`"));

    let out = pg_bandit(&["batch", "--config", "exp.toml"], dir.path(), "many");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PG_BANDIT_THREADS"));
}

#[test]
fn verify_report_from_a_reduced_plan() {
    let dir = tempfile::tempdir().unwrap();
    let config = RawConfig {
        preset: Some("theorem-regime".into()),
        out: Some(dir.path().to_path_buf()),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let plan = VerifyPlan {
        conservation_n: 2000,
        conservation_runs: 4,
        identity_states: 200,
        drift_states: 200,
        lemma3_states: 1000,
        theorem_runs: 200,
        grid_points: 100,
        determinism_n: 200,
        determinism_runs: 8,
        exploratory_n: 5000,
        exploratory_runs: 50,
        ..VerifyPlan::full(3)
    };
    let outcome = run_command(&config, &Cmd::Verify(plan), Parallelism::Auto).unwrap();
    assert!(outcome.success(), "{:?}", outcome.failures);
    let (header, rows) = data(&dir.path().join("verify_report.csv"));
    assert_eq!(header.join(","), VERIFY_COLUMNS);
    assert!(rows.len() >= 9);
    assert!(rows.iter().all(|r| &r[4] == "true"));
    assert!(rows.iter().all(|r| &r[1] == "deterministic" || &r[1] == "statistical"));
}
