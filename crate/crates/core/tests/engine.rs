use pg_bandit_core::diagnostics::{stopping_time, AnalysisParams};
use pg_bandit_core::engine::Experiment;
use pg_bandit_core::{
    derive_seed, gap_profile, instantaneous_regret, run_batch, run_episode, softmax,
    BanditInstance, LearningRateSpec, LogitVector, Parallelism, RecordingOptions, RewardDist,
};

fn two_arm() -> BanditInstance {
    BanditInstance::bernoulli(vec![0.9, 0.4]).unwrap()
}

#[test]
fn same_seed_same_trajectory() {
    let inst = BanditInstance::bernoulli(vec![0.3, 0.8, 0.5, 0.5]).unwrap();
    let rate = LearningRateSpec::Constant(0.05);
    let rec = RecordingOptions::default();
    let a = run_episode(&inst, &rate, 2000, 42, &rec).unwrap();
    let b = run_episode(&inst, &rate, 2000, 42, &rec).unwrap();
    assert_eq!(a, b);
    let c = run_episode(&inst, &rate, 2000, 43, &rec).unwrap();
    assert_ne!(a.steps, c.steps);
}

#[test]
fn point_mass_optimal_mass_never_decreases() {
    let inst = BanditInstance::with_family(vec![1.0, 0.0], RewardDist::PointMass).unwrap();
    let traj = run_episode(
        &inst,
        &LearningRateSpec::Constant(0.1),
        200,
        5,
        &RecordingOptions::default(),
    )
    .unwrap();
    for w in traj.steps.windows(2) {
        if w[0].action == 0 {
            assert!(w[1].theta_star > w[0].theta_star);
            assert!(w[1].pi_star >= w[0].pi_star);
        } else {
            assert_eq!(w[1].theta_star, w[0].theta_star);
            assert_eq!(w[1].pi_star, w[0].pi_star);
        }
    }
    // first five rounds by hand: pi_1 = 1/2, so one arm-1 pull adds 0.1 * 0.5
    let first_pull = traj.steps.iter().position(|s| s.action == 0).unwrap();
    let after = &traj.steps[first_pull + 1];
    assert!((after.theta_star - 0.05).abs() < 1e-15);
}

#[test]
fn tiny_rate_plays_uniformly() {
    let traj = run_episode(
        &two_arm(),
        &LearningRateSpec::Constant(1e-12),
        100,
        11,
        &RecordingOptions {
            stride: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    for snap in &traj.snapshots {
        assert!(snap.theta.iter().all(|t| t.abs() <= 1e-10));
    }
    // arm-2 pulls ~ Bin(100, 1/2): regret 0.5 * pulls, mean 25, sd 2.5
    assert!((traj.final_pseudo_regret() - 25.0).abs() <= 10.0);
    assert!((traj.final_expected_regret() - 25.0).abs() < 1e-8);
}

#[test]
fn streaming_and_offline_regret_agree() {
    let inst = BanditInstance::bernoulli(vec![0.2, 0.9, 0.6]).unwrap();
    let gaps = gap_profile(&inst).unwrap();
    let traj = run_episode(
        &inst,
        &LearningRateSpec::Constant(0.1),
        3000,
        9,
        &RecordingOptions {
            stride: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(traj.snapshots.len(), 3000);
    let mut offline = 0.0;
    for (snap, step) in traj.snapshots.iter().zip(&traj.steps) {
        let pi = softmax(&LogitVector(snap.theta.clone()))
            .unwrap()
            .to_sorted(&gaps);
        let r = instantaneous_regret(&pi, &gaps).unwrap();
        assert_eq!(r, step.inst_regret);
        offline += r;
        assert!(snap.theta.iter().sum::<f64>().abs() < 1e-12);
    }
    assert!((offline - traj.final_expected_regret()).abs() < 1e-9);
}

#[test]
fn step_records_are_consistent() {
    let inst = BanditInstance::bernoulli(vec![0.5, 0.9, 0.9, 0.1]).unwrap();
    let gaps = gap_profile(&inst).unwrap();
    let traj = run_episode(
        &inst,
        &LearningRateSpec::Constant(0.2),
        5000,
        4,
        &RecordingOptions::default(),
    )
    .unwrap();
    let mut prev_pseudo = 0.0;
    let mut prev_expected = 0.0;
    for w in traj.steps.windows(2) {
        let (s, next) = (&w[0], &w[1]);
        assert!(s.pi_star > 0.0 && s.pi_star < 1.0);
        assert!(s.inst_regret >= 0.0 && s.inst_regret <= gaps.delta_max);
        assert!((0.0..=1.0).contains(&s.reward));
        assert_eq!(s.realized_gap, gaps.gap_of(s.action));
        assert!((next.theta_star - s.theta_star).abs() <= s.eta * (1.0 + 1e-12));
        assert!(s.cum_pseudo_regret >= prev_pseudo && s.cum_expected_regret >= prev_expected);
        prev_pseudo = s.cum_pseudo_regret;
        prev_expected = s.cum_expected_regret;
    }
    assert!(traj.steps[0].g_event);
    assert_eq!(traj.steps[0].pair_margin, 0.0);
    assert_eq!(traj.steps.len(), 5000);
}

#[test]
fn stopping_time_from_trajectory() {
    // large rate so the good event fails early on this instance
    let inst = BanditInstance::bernoulli(vec![1.0, 0.75, 0.0]).unwrap();
    let rec = RecordingOptions::default();
    let exp = Experiment::new(inst, LearningRateSpec::Constant(0.5), 2000, rec).unwrap();
    for seed in 0..20 {
        let traj = exp.run_episode(seed).unwrap();
        let tau = stopping_time(&traj).unwrap();
        let first_bad = traj.steps.iter().skip(1).position(|s| !s.g_event);
        match first_bad {
            Some(i) => assert_eq!(tau, i as u64 + 1),
            None => assert_eq!(tau, 2000),
        }
        let summary = exp.summarize_run(0, seed).unwrap();
        assert_eq!(summary.tau, tau);
    }
}

#[test]
fn single_run_batch_matches_episode() {
    let inst = two_arm();
    let rate = LearningRateSpec::TheoremAuto;
    let rec = RecordingOptions::default();
    let batch = run_batch(&inst, &rate, 3000, 7, 1, &rec, Parallelism::Serial).unwrap();
    let traj = run_episode(&inst, &rate, 3000, derive_seed(7, 0), &rec).unwrap();
    let s = &batch.summaries[0];
    assert_eq!(s.seed, derive_seed(7, 0));
    assert_eq!(s.final_pseudo_regret, traj.final_pseudo_regret());
    assert_eq!(s.final_expected_regret, traj.final_expected_regret());
    let min_logit = traj
        .steps
        .iter()
        .map(|r| r.min_logit)
        .fold(f64::INFINITY, f64::min);
    let min_margin = traj
        .steps
        .iter()
        .map(|r| r.pair_margin)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(s.min_min_logit, min_logit);
    assert_eq!(s.min_pair_margin, min_margin);
    assert_eq!(s.tau, stopping_time(&traj).unwrap());
    assert_eq!(s.half_pseudo_regret, traj.steps[1499].cum_pseudo_regret);
    assert_eq!(batch.aggregates.len(), 3);
    assert_eq!(batch.aggregates[2].pseudo.mean, s.final_pseudo_regret);
    assert_eq!(
        batch.aggregates[1].expected.mean,
        traj.steps[1499].cum_expected_regret
    );
    assert_eq!(batch.final_pseudo().std, 0.0);
}

#[test]
fn batch_is_parallelism_invariant() {
    let inst = BanditInstance::bernoulli(vec![0.9, 0.7, 0.5, 0.3, 0.1]).unwrap();
    let rate = LearningRateSpec::Constant(0.05);
    let rec = RecordingOptions::default();
    let serial = run_batch(&inst, &rate, 1000, 99, 64, &rec, Parallelism::Serial).unwrap();
    let par = run_batch(&inst, &rate, 1000, 99, 64, &rec, Parallelism::Threads(4)).unwrap();
    let auto = run_batch(&inst, &rate, 1000, 99, 64, &rec, Parallelism::Auto).unwrap();
    assert_eq!(serial, par);
    assert_eq!(serial, auto);
    assert_eq!(serial.runs(), 64);
    assert!(serial
        .summaries
        .iter()
        .enumerate()
        .all(|(i, s)| s.run_index == i));
}

#[test]
fn pseudo_and_expected_regret_estimators_agree() {
    let batch = run_batch(
        &two_arm(),
        &LearningRateSpec::TheoremAuto,
        10_000,
        2024,
        1000,
        &RecordingOptions::default(),
        Parallelism::Auto,
    )
    .unwrap();
    // paired differences: pseudo - expected is a martingale per run
    let diffs: Vec<f64> = batch
        .summaries
        .iter()
        .map(|s| s.final_pseudo_regret - s.final_expected_regret)
        .collect();
    let m = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / m;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    assert!(
        mean.abs() <= 3.0 * sd / m.sqrt(),
        "mean diff {mean}, se {}",
        sd / m.sqrt()
    );
}

#[test]
fn run_errors_carry_the_run_index() {
    let inst = two_arm();
    let rec = RecordingOptions {
        delta: Some(2.0),
        ..Default::default()
    };
    assert!(run_batch(
        &inst,
        &LearningRateSpec::Constant(0.1),
        100,
        1,
        4,
        &rec,
        Parallelism::Serial
    )
    .is_err());
    let g = gap_profile(&inst).unwrap();
    assert!(AnalysisParams::new(100, Some(2.0), &g).is_err());
}
