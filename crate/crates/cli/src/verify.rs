//! The verification suite: exact identities checked by enumeration and
//! statistical checks on fixed-seed batches with pre-registered bands.

use std::fmt;

use pg_bandit_core::diagnostics::{
    event_frequency, one_step_drift, psi, psi_prime, psi_second, AnalysisParams, EventKind,
    EXACT_TOL,
};
use pg_bandit_core::fuzz::{random_case, random_in_event_logits, FuzzCase};
use pg_bandit_core::{
    derive_seed, theorem_learning_rate, BanditInstance, BatchResult, Error, GapProfile,
    Parallelism, RandomStream,
};

use crate::config::{ExperimentConfig, RawConfig, RawEta};
use crate::output::{batch_csv, summary_csv};
use crate::summary::summarize_batch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Deterministic,
    Statistical,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Deterministic => "deterministic",
            CheckKind::Statistical => "statistical",
        })
    }
}

/// One row of the verification report. `value` is compared against
/// `threshold` in the direction the check's name states.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: &str, kind: CheckKind, value: f64, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            kind,
            value,
            threshold,
            pass,
        }
    }

    fn at_most(name: &str, kind: CheckKind, value: f64, threshold: f64) -> Self {
        Self::new(name, kind, value, threshold, value <= threshold)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} ({}): value={:e} threshold={:e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.kind,
            self.value,
            self.threshold
        )
    }
}

/// Sizes and seeds of every check. [`VerifyPlan::full`] is the acceptance
/// scale.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyPlan {
    pub seed: u64,
    pub parallelism: Parallelism,
    pub conservation_n: u64,
    pub conservation_runs: usize,
    pub identity_states: usize,
    pub drift_states: usize,
    pub lemma3_states: usize,
    pub theorem_n: u64,
    pub theorem_runs: usize,
    pub grid_points: usize,
    pub determinism_n: u64,
    pub determinism_runs: usize,
    pub exploratory_n: u64,
    pub exploratory_runs: usize,
}

impl VerifyPlan {
    pub fn full(seed: u64) -> Self {
        Self {
            seed,
            parallelism: Parallelism::Auto,
            conservation_n: 100_000,
            conservation_runs: 100,
            identity_states: 10_000,
            drift_states: 10_000,
            lemma3_states: 100_000,
            theorem_n: 10_000,
            theorem_runs: 10_000,
            grid_points: 1000,
            determinism_n: 1000,
            determinism_runs: 64,
            exploratory_n: 100_000,
            exploratory_runs: 1000,
        }
    }

    fn stream(&self, salt: u64) -> RandomStream {
        RandomStream::from_seed(derive_seed(self.seed, salt))
    }
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, Error> {
    raw.resolve()
        .map_err(|e| Error::PreconditionViolated(e.to_string()))
}

/// Ten arms with means `0.9, 0.8, ..., 0.0` at the theorem rate.
pub fn conservation_config(plan: &VerifyPlan) -> Result<ExperimentConfig, Error> {
    resolve(RawConfig {
        means: Some((0..10).map(|i| (9 - i) as f64 / 10.0).collect()),
        n: Some(plan.conservation_n),
        eta: Some(RawEta::Named("theorem_auto".into())),
        m: Some(plan.conservation_runs),
        seed: Some(derive_seed(plan.seed, 1)),
        ..Default::default()
    })
}

/// Two arms, `mu = (0.9, 0.4)`, theorem rate, default `delta`.
pub fn theorem_config(plan: &VerifyPlan) -> Result<ExperimentConfig, Error> {
    resolve(RawConfig {
        preset: Some("theorem-regime".into()),
        n: Some(plan.theorem_n),
        m: Some(plan.theorem_runs),
        seed: Some(derive_seed(plan.seed, 5)),
        ..Default::default()
    })
}

pub fn exploratory_config(plan: &VerifyPlan) -> Result<ExperimentConfig, Error> {
    resolve(RawConfig {
        preset: Some("lower-bound-instance".into()),
        gap: Some(0.25),
        eta_multiplier: Some(10.0),
        n: Some(plan.exploratory_n),
        m: Some(plan.exploratory_runs),
        seed: Some(derive_seed(plan.seed, 9)),
        ..Default::default()
    })
}

pub fn determinism_config(plan: &VerifyPlan) -> Result<ExperimentConfig, Error> {
    resolve(RawConfig {
        means: Some(vec![0.9, 0.7, 0.5, 0.3, 0.1]),
        n: Some(plan.determinism_n),
        eta: Some(RawEta::Named("theorem_auto".into())),
        m: Some(plan.determinism_runs),
        seed: Some(derive_seed(plan.seed, 8)),
        ..Default::default()
    })
}

pub fn run_config(
    config: &ExperimentConfig,
    parallelism: Parallelism,
) -> Result<BatchResult, Error> {
    config
        .experiment()?
        .run_batch(config.seed, config.runs, parallelism)
}

/// Logit sums and per-step increments over a ten-arm batch.
pub fn check_conservation(batch: &BatchResult) -> Vec<CheckResult> {
    use CheckKind::Deterministic as D;
    vec![
        CheckResult::at_most(
            "conservation.max_abs_logit_sum",
            D,
            batch.max_abs_logit_sum(),
            1e-9,
        ),
        CheckResult::at_most(
            "update.max_increment_over_eta",
            D,
            batch.max_increment_ratio(),
            1.0 + EXACT_TOL,
        ),
    ]
}

/// Random centred logits, half of them inside the good event.
fn random_state(rng: &mut RandomStream, case: &FuzzCase) -> Vec<f64> {
    if rng.next_f64() < 0.5 {
        return random_in_event_logits(rng, &case.gaps, &case.params);
    }
    let scale = 10.0 * rng.next_f64();
    let mut theta: Vec<f64> = (0..case.gaps.k())
        .map(|_| scale * (2.0 * rng.next_f64() - 1.0))
        .collect();
    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    theta.iter_mut().for_each(|t| *t -= mean);
    theta
}

/// `E[D]` and `E[D^2]` for Bernoulli rewards written directly in the means.
fn bernoulli_moments(
    instance: &BanditInstance,
    gaps: &GapProfile,
    theta: &[f64],
    eta: f64,
) -> (f64, f64) {
    let means = gaps.to_sorted(instance.means());
    let top = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let pi: Vec<f64> = w.iter().map(|x| x / z).collect();
    let pi_star: f64 = pi[..gaps.k_star].iter().sum();
    let regret: f64 = pi.iter().zip(&means).map(|(p, m)| p * (means[0] - m)).sum();
    let second = pi
        .iter()
        .zip(&means)
        .enumerate()
        .map(|(i, (p, m))| {
            let dir = if i < gaps.k_star {
                1.0 - pi_star
            } else {
                -pi_star
            };
            p * m * (eta * dir).powi(2)
        })
        .sum();
    (eta * pi_star * regret, second)
}

/// Enumerated first and second moments of the optimal-logit increment on
/// random Bernoulli states.
pub fn check_identities(plan: &VerifyPlan) -> Result<Vec<CheckResult>, Error> {
    let mut rng = plan.stream(2);
    let (mut worst_mean, mut worst_closed, mut worst_second, mut violations) =
        (0.0f64, 0.0f64, 0.0f64, 0u64);
    for _ in 0..plan.identity_states {
        let case = random_case(&mut rng, 10)?;
        let theta = random_state(&mut rng, &case);
        let eta = case.gaps.delta_min / 4.0 * (1.0 - rng.next_f64());
        let rep = one_step_drift(&case.instance, &theta, eta, &case.gaps, &case.params)?;
        let (mean, second) = bernoulli_moments(&case.instance, &case.gaps, &theta, eta);
        worst_mean = worst_mean.max((rep.expected_increment - mean).abs());
        worst_closed = worst_closed.max((rep.expected_increment - rep.closed_form_increment).abs());
        worst_second = worst_second.max((rep.second_moment - second).abs());
        if !rep.second_moment_holds(EXACT_TOL) {
            violations += 1;
        }
    }
    use CheckKind::Deterministic as D;
    Ok(vec![
        CheckResult::at_most(
            "identity.mean_increment_vs_eta_pi_regret",
            D,
            worst_closed,
            EXACT_TOL,
        ),
        CheckResult::at_most("identity.mean_increment_vs_means", D, worst_mean, EXACT_TOL),
        CheckResult::at_most(
            "identity.second_moment_vs_means",
            D,
            worst_second,
            EXACT_TOL,
        ),
        CheckResult::at_most(
            "identity.second_moment_bound_violations",
            D,
            violations as f64,
            0.0,
        ),
    ])
}

/// Exact one-step drift of the potential on random good-event states at the
/// theorem rate.
pub fn check_drift(plan: &VerifyPlan) -> Result<Vec<CheckResult>, Error> {
    let mut rng = plan.stream(3);
    let (mut regret_failures, mut slope_failures) = (0u64, 0u64);
    for _ in 0..plan.drift_states {
        let case = random_case(&mut rng, 10)?;
        let theta = random_in_event_logits(&mut rng, &case.gaps, &case.params);
        let eta = theorem_learning_rate(&case.gaps, case.params.n, case.gaps.k())?;
        let rep = one_step_drift(&case.instance, &theta, eta, &case.gaps, &case.params)?;
        if rep.psi_drift.is_nan() || rep.psi_drift < rep.regret_drift_bound - EXACT_TOL {
            regret_failures += 1;
        }
        if rep.psi_drift.is_nan() || rep.psi_drift < rep.drift_lower_bound - EXACT_TOL {
            slope_failures += 1;
        }
    }
    use CheckKind::Deterministic as D;
    Ok(vec![
        CheckResult::at_most(
            "drift.below_eta_regret_half",
            D,
            regret_failures as f64,
            0.0,
        ),
        CheckResult::at_most(
            "drift.below_eta_slope_pi_regret_half",
            D,
            slope_failures as f64,
            0.0,
        ),
    ])
}

/// Optimal-mass bound and logit range on fuzzed good-event states.
pub fn check_lemma3_fuzz(plan: &VerifyPlan) -> Result<Vec<CheckResult>, Error> {
    let mut rng = plan.stream(4);
    let (mut checked, mut failures) = (0usize, 0u64);
    while checked < plan.lemma3_states {
        let case = random_case(&mut rng, 10)?;
        for _ in 0..20.min(plan.lemma3_states - checked) {
            let theta = random_in_event_logits(&mut rng, &case.gaps, &case.params);
            let rec = pg_bandit_core::diagnostics::lemma3_check(&theta, &case.gaps, &case.params)?;
            if !rec.passed() {
                failures += 1;
            }
            checked += 1;
        }
    }
    Ok(vec![CheckResult::at_most(
        "lemma3.fuzz_failures",
        CheckKind::Deterministic,
        failures as f64,
        0.0,
    )])
}

/// The same bounds on every in-event step of a batch.
pub fn check_lemma3_batch(name: &str, batch: &BatchResult) -> Vec<CheckResult> {
    let mut checks = vec![CheckResult::at_most(
        &format!("lemma3.{name}_failures"),
        CheckKind::Deterministic,
        batch.total_lemma3_failures() as f64,
        0.0,
    )];
    // an empty check would pass vacuously
    checks.push(CheckResult::new(
        &format!("lemma3.{name}_in_event_steps"),
        CheckKind::Deterministic,
        batch.total_in_event_steps() as f64,
        1.0,
        batch.total_in_event_steps() >= 1,
    ));
    checks
}

/// Breach counts against the union-bound ceilings.
pub fn check_events(batch: &BatchResult) -> Result<Vec<CheckResult>, Error> {
    [
        EventKind::MinLogitBreach,
        EventKind::PairMarginBreach,
        EventKind::GBreach,
    ]
    .into_iter()
    .map(|kind| {
        let e = event_frequency(batch, kind)?;
        Ok(CheckResult::new(
            &format!("event.{}.wilson_lo_within_ceiling", kind.name()),
            CheckKind::Statistical,
            if e.count == 0 { 0.0 } else { e.wilson_lo },
            e.ceiling,
            e.within_ceiling(),
        ))
    })
    .collect()
}

/// Mean regret against `10 k ln(n) ln(k) / eta`, and the per-run
/// second-half comparison.
pub fn check_regret(batch: &BatchResult, config: &ExperimentConfig) -> Vec<CheckResult> {
    let k = batch.k.max(2) as f64;
    let ceiling = 10.0 * batch.k as f64 * (batch.n as f64).ln() * k.ln() / config.bound_rate();
    let mean = batch.final_pseudo().mean;
    let fraction = batch.fraction_second_half_smaller();
    vec![
        CheckResult::new(
            "regret.mean_below_shape_bound",
            CheckKind::Statistical,
            mean,
            ceiling,
            mean < ceiling,
        ),
        CheckResult::new(
            "regret.fraction_second_half_smaller",
            CheckKind::Statistical,
            fraction,
            0.95,
            fraction >= 0.95,
        ),
    ]
}

fn grid_params() -> Result<Vec<AnalysisParams>, Error> {
    let mut out = Vec::new();
    for (means, n) in [
        (vec![0.9, 0.4], 10_000u64),
        (vec![0.8, 0.8, 0.5, 0.1, 0.0], 100_000),
        (
            vec![1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.2, 0.2, 0.0, 0.0],
            1_000_000,
        ),
    ] {
        let gaps = pg_bandit_core::gap_profile(&BanditInstance::bernoulli(means)?)?;
        out.push(AnalysisParams::new(n, None, &gaps)?);
    }
    Ok(out)
}

/// Finite differences of the potential on a grid over `[-k*, k L]`.
pub fn check_potential(plan: &VerifyPlan) -> Result<Vec<CheckResult>, Error> {
    let h = 1e-5;
    let (mut worst_rel, mut worst_curvature, mut worst_fd_curvature) =
        (0.0f64, f64::INFINITY, f64::INFINITY);
    let points = plan.grid_points.max(2);
    for p in grid_params()? {
        let lo = -(p.k_star as f64);
        let hi = p.k as f64 * p.log_term;
        for i in 0..points {
            let u = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let slope = psi_prime(u, &p)?;
            let fd = (psi(u + h, &p)? - psi(u - h, &p)?) / (2.0 * h);
            worst_rel = worst_rel.max(((fd - slope) / slope).abs());
            worst_curvature = worst_curvature.min(psi_second(u, &p)? + slope);
            let h2 = 1e-3;
            let fd2 = (psi(u + h2, &p)? - 2.0 * psi(u, &p)? + psi(u - h2, &p)?) / (h2 * h2);
            worst_fd_curvature = worst_fd_curvature.min(fd2 + slope);
        }
    }
    use CheckKind::Deterministic as D;
    Ok(vec![
        CheckResult::at_most("potential.slope_fd_relative_error", D, worst_rel, 1e-6),
        CheckResult::new(
            "potential.min_curvature_plus_slope",
            D,
            worst_curvature,
            0.0,
            worst_curvature >= 0.0,
        ),
        CheckResult::new(
            "potential.min_fd_curvature_plus_slope",
            D,
            worst_fd_curvature,
            -1e-6,
            worst_fd_curvature >= -1e-6,
        ),
    ])
}

/// Serial and parallel execution of the same batch serialize to the same
/// bytes.
pub fn check_determinism(plan: &VerifyPlan) -> Result<Vec<CheckResult>, Error> {
    let config = determinism_config(plan)?;
    let serial = run_config(&config, Parallelism::Serial)?;
    let parallel = run_config(&config, Parallelism::Threads(4))?;
    let bytes = |b: &BatchResult| -> Result<String, Error> {
        let summary = summarize_batch(b, &config)?;
        Ok(batch_csv(&config, b) + &summary_csv(&config, b, &summary))
    };
    let same = serial == parallel && bytes(&serial)? == bytes(&parallel)?;
    let repeat = run_config(&config, Parallelism::Serial)? == serial;
    Ok(vec![
        CheckResult::new(
            "determinism.serial_equals_parallel",
            CheckKind::Deterministic,
            same as u8 as f64,
            1.0,
            same,
        ),
        CheckResult::new(
            "determinism.repeat_equals_first",
            CheckKind::Deterministic,
            repeat as u8 as f64,
            1.0,
            repeat,
        ),
    ])
}

/// Pair-margin breach frequency under the large-rate lower-bound instance,
/// compared with the theorem-regime batch.
pub fn check_exploratory(
    exploratory: &BatchResult,
    theorem: &BatchResult,
) -> Result<Vec<CheckResult>, Error> {
    let hot = event_frequency(exploratory, EventKind::PairMarginBreach)?;
    let cold = event_frequency(theorem, EventKind::PairMarginBreach)?;
    Ok(vec![CheckResult::new(
        "exploratory.pair_margin_breach_rate_above_theorem",
        CheckKind::Statistical,
        hot.rate,
        cold.rate,
        hot.rate > cold.rate,
    )])
}

/// Runs every check in the plan.
pub fn run_suite(plan: &VerifyPlan) -> Result<Vec<CheckResult>, Error> {
    let mut checks = Vec::new();
    let conservation = run_config(&conservation_config(plan)?, plan.parallelism)?;
    checks.extend(check_conservation(&conservation));
    checks.extend(check_identities(plan)?);
    checks.extend(check_drift(plan)?);
    checks.extend(check_lemma3_fuzz(plan)?);
    checks.extend(check_lemma3_batch("conservation_batch", &conservation));
    drop(conservation);

    let theorem_cfg = theorem_config(plan)?;
    let theorem = run_config(&theorem_cfg, plan.parallelism)?;
    checks.extend(check_lemma3_batch("theorem_batch", &theorem));
    checks.extend(check_events(&theorem)?);
    checks.extend(check_regret(&theorem, &theorem_cfg));
    checks.extend(check_potential(plan)?);
    checks.extend(check_determinism(plan)?);
    let exploratory = run_config(&exploratory_config(plan)?, plan.parallelism)?;
    checks.extend(check_exploratory(&exploratory, &theorem)?);
    Ok(checks)
}
