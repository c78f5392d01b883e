//! Seeded episodes, trajectory recording and parallel batches.
//!
//! An episode is a strictly sequential recursion; batches parallelise over
//! runs only. Run `i` of a batch uses the seed `derive_seed(base, i)` and the
//! per-run summaries are collected by run index, so a batch result does not
//! depend on how many threads executed it.

use rayon::prelude::*;

use crate::agent::{theorem_learning_rate, AgentState, LearningRateSpec};
use crate::bandit::{
    dot, gap_profile, sample_index, sample_reward, softmax_into, BanditInstance, GapProfile,
};
use crate::diagnostics::{self, g_event_from_parts, lemma3_check, AnalysisParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, RandomStream, RNG_ALGORITHM};
use crate::stats::{describe, Describe};

/// What to record and which confidence level the event flags use.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingOptions {
    /// Keep full logit snapshots in trajectories.
    pub snapshots: bool,
    /// Snapshot stride; defaults to `max(1, n / 1000)`.
    pub stride: Option<usize>,
    /// Defaults to `1 / (k^2 n)`.
    pub delta: Option<f64>,
    /// Regret checkpoints for batch aggregates; defaults to `{n/10, n/2, n}`.
    pub checkpoints: Option<Vec<u64>>,
}

impl Default for RecordingOptions {
    fn default() -> Self {
        Self {
            snapshots: true,
            stride: None,
            delta: None,
            checkpoints: None,
        }
    }
}

impl RecordingOptions {
    pub fn stride_for(&self, n: u64) -> usize {
        self.stride.unwrap_or_else(|| default_stride(n)).max(1)
    }

    pub fn checkpoints_for(&self, n: u64) -> Vec<u64> {
        let mut points = self
            .checkpoints
            .clone()
            .unwrap_or_else(|| default_checkpoints(n));
        points.retain(|&t| t >= 1 && t <= n);
        points.sort_unstable();
        points.dedup();
        points
    }
}

pub fn default_stride(n: u64) -> usize {
    ((n / 1000) as usize).max(1)
}

pub fn default_checkpoints(n: u64) -> Vec<u64> {
    vec![n / 10, n / 2, n]
}

/// One round, observed before the update. Logit quantities refer to `theta_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    /// User-order arm index (0-based).
    pub action: usize,
    pub reward: f64,
    pub eta: f64,
    pub pi_star: f64,
    pub theta_star: f64,
    pub inst_regret: f64,
    pub realized_gap: f64,
    pub min_logit: f64,
    pub pair_margin: f64,
    pub g_event: bool,
    pub cum_pseudo_regret: f64,
    pub cum_expected_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: u64,
    /// `theta_t` in user order.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub instance: BanditInstance,
    pub requested_rate: LearningRateSpec,
    pub rate: LearningRateSpec,
    pub n: u64,
    pub delta: f64,
    pub log_term: f64,
    pub theorem_rate: f64,
    /// Every rate used is at most the theorem rate.
    pub theorem_regime: bool,
    pub rng: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub stride: usize,
    /// `theta_{n+1}`.
    pub final_theta: Vec<f64>,
    pub meta: RunMetadata,
}

impl Trajectory {
    pub fn final_pseudo_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_pseudo_regret)
    }

    pub fn final_expected_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_expected_regret)
    }
}

/// A validated instance, resolved learning rate and analysis parameters,
/// shared by every run of a batch.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub instance: BanditInstance,
    pub gaps: GapProfile,
    pub params: AnalysisParams,
    pub requested_rate: LearningRateSpec,
    pub rate: LearningRateSpec,
    pub n: u64,
    pub recording: RecordingOptions,
}

impl Experiment {
    pub fn new(
        instance: BanditInstance,
        rate: LearningRateSpec,
        n: u64,
        recording: RecordingOptions,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidHorizon("horizon must be positive".into()));
        }
        if n < instance.k() as u64 {
            return Err(Error::InvalidHorizon(format!(
                "horizon {n} is smaller than the arm count {}",
                instance.k()
            )));
        }
        let gaps = gap_profile(&instance)?;
        let params = AnalysisParams::new(n, recording.delta, &gaps)?;
        let resolved = rate.resolved(&gaps, n)?;
        Ok(Self {
            instance,
            gaps,
            params,
            requested_rate: rate,
            rate: resolved,
            n,
            recording,
        })
    }

    pub fn k(&self) -> usize {
        self.instance.k()
    }

    pub fn theorem_rate(&self) -> f64 {
        theorem_learning_rate(&self.gaps, self.n, self.k()).expect("n >= k >= 2")
    }

    pub fn metadata(&self) -> RunMetadata {
        let theorem_rate = self.theorem_rate();
        let max_rate = self.rate.max_rate(None, None).unwrap_or(f64::INFINITY);
        RunMetadata {
            instance: self.instance.clone(),
            requested_rate: self.requested_rate.clone(),
            rate: self.rate.clone(),
            n: self.n,
            delta: self.params.delta,
            log_term: self.params.log_term,
            theorem_rate,
            theorem_regime: max_rate <= theorem_rate * (1.0 + 1e-12),
            rng: RNG_ALGORITHM,
        }
    }

    /// Runs the recursion, handing each round's record and `theta_t` (user
    /// order) to `observe`. Returns `theta_{n+1}`.
    pub fn simulate<F>(&self, seed: u64, mut observe: F) -> Result<Vec<f64>>
    where
        F: FnMut(&StepRecord, &[f64]),
    {
        let k = self.k();
        let ks = self.gaps.k_star;
        let mut agent = AgentState::new(k, self.rate.clone())?;
        let mut rng = RandomStream::from_seed(seed);
        let mut pi = vec![0.0; k];
        let mut theta_sorted = vec![0.0; k];
        let mut pi_sorted = vec![0.0; k];
        let mut cum_pseudo = 0.0;
        let mut cum_expected = 0.0;

        for t in 1..=self.n {
            let eta = agent.current_rate()?;
            let theta = agent.theta.as_slice();
            softmax_into(theta, &mut pi)?;
            self.gaps.sort_into(theta, &mut theta_sorted);
            self.gaps.sort_into(&pi, &mut pi_sorted);

            let pi_star: f64 = pi_sorted[..ks].iter().sum();
            let theta_star: f64 = theta_sorted[..ks].iter().sum();
            let inst_regret = dot(&pi_sorted, &self.gaps.delta);
            let min_logit = diagnostics::min_logit(&theta_sorted);
            let pair_margin = diagnostics::pair_margin(&theta_sorted, &self.gaps);
            let g_event = g_event_from_parts(min_logit, pair_margin, &self.params);

            let action = sample_index(&pi, &mut rng);
            let reward = sample_reward(&self.instance, action, &mut rng)?;
            let realized_gap = self.gaps.gap_of(action);
            cum_pseudo += realized_gap;
            cum_expected += inst_regret;

            let record = StepRecord {
                t,
                action,
                reward,
                eta,
                pi_star,
                theta_star,
                inst_regret,
                realized_gap,
                min_logit,
                pair_margin,
                g_event,
                cum_pseudo_regret: cum_pseudo,
                cum_expected_regret: cum_expected,
            };
            observe(&record, theta);
            agent.update_with_policy(action, reward, &pi)?;
        }
        Ok(agent.theta.0)
    }

    pub fn run_episode(&self, seed: u64) -> Result<Trajectory> {
        let stride = self.recording.stride_for(self.n);
        let keep = self.recording.snapshots;
        let mut steps = Vec::with_capacity(self.n as usize);
        let mut snapshots = Vec::new();
        let final_theta = self.simulate(seed, |record, theta| {
            steps.push(*record);
            if keep && (record.t - 1) % stride as u64 == 0 {
                snapshots.push(Snapshot {
                    t: record.t,
                    theta: theta.to_vec(),
                });
            }
        })?;
        Ok(Trajectory {
            seed,
            steps,
            snapshots,
            stride,
            final_theta,
            meta: self.metadata(),
        })
    }

    /// Streams one run into its summary without keeping the trajectory.
    pub fn summarize_run(&self, run_index: usize, seed: u64) -> Result<RunSummary> {
        let checkpoints = self.recording.checkpoints_for(self.n);
        let mut acc = SummaryAccumulator::new(self, &checkpoints);
        let final_theta = self.simulate(seed, |record, theta| acc.observe(record, theta))?;
        Ok(acc.finish(run_index, seed, &final_theta))
    }

    pub fn run_batch(
        &self,
        base_seed: u64,
        runs: usize,
        parallelism: Parallelism,
    ) -> Result<BatchResult> {
        if runs == 0 {
            return Err(Error::InvalidBatch("run count must be at least 1".into()));
        }
        let job = |i: usize| {
            self.summarize_run(i, derive_seed(base_seed, i as u64))
                .map_err(|e| Error::Run {
                    run: i,
                    source: Box::new(e),
                })
        };
        let summaries = match parallelism {
            Parallelism::Serial => (0..runs).map(job).collect::<Result<Vec<_>>>()?,
            Parallelism::Auto => (0..runs)
                .into_par_iter()
                .map(job)
                .collect::<Result<Vec<_>>>()?,
            Parallelism::Threads(threads) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads.max(1))
                    .build()
                    .map_err(|e| Error::InvalidBatch(e.to_string()))?;
                pool.install(|| {
                    (0..runs)
                        .into_par_iter()
                        .map(job)
                        .collect::<Result<Vec<_>>>()
                })?
            }
        };
        Ok(BatchResult::from_summaries(self, base_seed, summaries))
    }
}

/// One episode of softmax policy gradient.
pub fn run_episode(
    instance: &BanditInstance,
    rate: &LearningRateSpec,
    n: u64,
    seed: u64,
    recording: &RecordingOptions,
) -> Result<Trajectory> {
    Experiment::new(instance.clone(), rate.clone(), n, recording.clone())?.run_episode(seed)
}

/// `runs` independent episodes seeded by [`derive_seed`].
pub fn run_batch(
    instance: &BanditInstance,
    rate: &LearningRateSpec,
    n: u64,
    base_seed: u64,
    runs: usize,
    recording: &RecordingOptions,
    parallelism: Parallelism,
) -> Result<BatchResult> {
    Experiment::new(instance.clone(), rate.clone(), n, recording.clone())?.run_batch(
        base_seed,
        runs,
        parallelism,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Serial,
    /// Rayon's global pool.
    Auto,
    Threads(usize),
}

/// Per-run statistics kept by batches.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_index: usize,
    pub seed: u64,
    pub final_pseudo_regret: f64,
    pub final_expected_regret: f64,
    /// Pseudo-regret accumulated over rounds `1..=n/2`.
    pub half_pseudo_regret: f64,
    pub checkpoint_pseudo_regret: Vec<f64>,
    pub checkpoint_expected_regret: Vec<f64>,
    /// `min_t min_c theta_{t,c}` over `t = 1..=n`.
    pub min_min_logit: f64,
    /// `min_t pair_margin(theta_t)` over `t = 1..=n`.
    pub min_pair_margin: f64,
    pub tau: u64,
    /// Largest `|sum_a theta_{t,a}|` over `t = 1..=n+1`.
    pub max_abs_logit_sum: f64,
    /// Largest `|theta_{t+1,a} - theta_{t,a}| / eta_t`.
    pub max_increment_ratio: f64,
    pub in_event_steps: u64,
    pub lemma3_failures: u64,
}

impl RunSummary {
    pub fn second_half_pseudo_regret(&self) -> f64 {
        self.final_pseudo_regret - self.half_pseudo_regret
    }

    /// Second-half over first-half regret; 0 when no regret was incurred.
    pub fn sublinearity_ratio(&self) -> f64 {
        let first = self.half_pseudo_regret;
        let second = self.second_half_pseudo_regret();
        if first > 0.0 {
            second / first
        } else if second > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

struct SummaryAccumulator<'a> {
    exp: &'a Experiment,
    checkpoints: &'a [u64],
    next_checkpoint: usize,
    half: u64,
    summary: RunSummary,
    tau: Option<u64>,
    prev_theta: Vec<f64>,
    prev_eta: f64,
    sorted: Vec<f64>,
}

impl<'a> SummaryAccumulator<'a> {
    fn new(exp: &'a Experiment, checkpoints: &'a [u64]) -> Self {
        Self {
            exp,
            checkpoints,
            next_checkpoint: 0,
            half: exp.n / 2,
            summary: RunSummary {
                run_index: 0,
                seed: 0,
                final_pseudo_regret: 0.0,
                final_expected_regret: 0.0,
                half_pseudo_regret: 0.0,
                checkpoint_pseudo_regret: Vec::with_capacity(checkpoints.len()),
                checkpoint_expected_regret: Vec::with_capacity(checkpoints.len()),
                min_min_logit: f64::INFINITY,
                min_pair_margin: f64::INFINITY,
                tau: exp.n,
                max_abs_logit_sum: 0.0,
                max_increment_ratio: 0.0,
                in_event_steps: 0,
                lemma3_failures: 0,
            },
            tau: None,
            prev_theta: Vec::new(),
            prev_eta: 0.0,
            sorted: vec![0.0; exp.k()],
        }
    }

    fn track_theta(&mut self, theta: &[f64]) {
        let s = &mut self.summary;
        s.max_abs_logit_sum = s.max_abs_logit_sum.max(theta.iter().sum::<f64>().abs());
        if !self.prev_theta.is_empty() {
            let step = theta
                .iter()
                .zip(&self.prev_theta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            s.max_increment_ratio = s.max_increment_ratio.max(step / self.prev_eta);
        }
        self.prev_theta.clear();
        self.prev_theta.extend_from_slice(theta);
    }

    fn observe(&mut self, r: &StepRecord, theta: &[f64]) {
        self.track_theta(theta);
        self.prev_eta = r.eta;
        let s = &mut self.summary;
        s.min_min_logit = s.min_min_logit.min(r.min_logit);
        s.min_pair_margin = s.min_pair_margin.min(r.pair_margin);
        if r.t >= 2 && !r.g_event && self.tau.is_none() {
            self.tau = Some(r.t - 1);
        }
        if r.g_event {
            s.in_event_steps += 1;
            self.exp.gaps.sort_into(theta, &mut self.sorted);
            match lemma3_check(&self.sorted, &self.exp.gaps, &self.exp.params) {
                Ok(rec) if rec.passed() => {}
                _ => s.lemma3_failures += 1,
            }
        }
        if r.t == self.half {
            s.half_pseudo_regret = r.cum_pseudo_regret;
        }
        while self.next_checkpoint < self.checkpoints.len()
            && self.checkpoints[self.next_checkpoint] == r.t
        {
            s.checkpoint_pseudo_regret.push(r.cum_pseudo_regret);
            s.checkpoint_expected_regret.push(r.cum_expected_regret);
            self.next_checkpoint += 1;
        }
        s.final_pseudo_regret = r.cum_pseudo_regret;
        s.final_expected_regret = r.cum_expected_regret;
    }

    fn finish(mut self, run_index: usize, seed: u64, final_theta: &[f64]) -> RunSummary {
        self.track_theta(final_theta);
        self.summary.run_index = run_index;
        self.summary.seed = seed;
        self.summary.tau = self.tau.unwrap_or(self.exp.n);
        self.summary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointAggregate {
    pub t: u64,
    pub pseudo: Describe,
    pub expected: Describe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub n: u64,
    pub k: usize,
    pub base_seed: u64,
    pub params: AnalysisParams,
    pub meta: RunMetadata,
    pub checkpoints: Vec<u64>,
    /// Ordered by run index.
    pub summaries: Vec<RunSummary>,
    pub aggregates: Vec<CheckpointAggregate>,
}

impl BatchResult {
    fn from_summaries(exp: &Experiment, base_seed: u64, summaries: Vec<RunSummary>) -> Self {
        let checkpoints = exp.recording.checkpoints_for(exp.n);
        let aggregates = checkpoints
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let pseudo: Vec<f64> = summaries
                    .iter()
                    .map(|s| s.checkpoint_pseudo_regret[i])
                    .collect();
                let expected: Vec<f64> = summaries
                    .iter()
                    .map(|s| s.checkpoint_expected_regret[i])
                    .collect();
                CheckpointAggregate {
                    t,
                    pseudo: describe(&pseudo),
                    expected: describe(&expected),
                }
            })
            .collect();
        Self {
            n: exp.n,
            k: exp.k(),
            base_seed,
            params: exp.params,
            meta: exp.metadata(),
            checkpoints,
            summaries,
            aggregates,
        }
    }

    pub fn runs(&self) -> usize {
        self.summaries.len()
    }

    pub fn final_pseudo(&self) -> Describe {
        describe(
            &self
                .summaries
                .iter()
                .map(|s| s.final_pseudo_regret)
                .collect::<Vec<_>>(),
        )
    }

    pub fn final_expected(&self) -> Describe {
        describe(
            &self
                .summaries
                .iter()
                .map(|s| s.final_expected_regret)
                .collect::<Vec<_>>(),
        )
    }

    /// Total second-half regret over total first-half regret.
    pub fn sublinearity_indicator(&self) -> f64 {
        let first: f64 = self.summaries.iter().map(|s| s.half_pseudo_regret).sum();
        let second: f64 = self
            .summaries
            .iter()
            .map(|s| s.second_half_pseudo_regret())
            .sum();
        if first > 0.0 {
            second / first
        } else if second > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Fraction of runs whose second-half regret is below the first half.
    pub fn fraction_second_half_smaller(&self) -> f64 {
        let hits = self
            .summaries
            .iter()
            .filter(|s| s.second_half_pseudo_regret() < s.half_pseudo_regret)
            .count();
        hits as f64 / self.summaries.len().max(1) as f64
    }

    pub fn total_lemma3_failures(&self) -> u64 {
        self.summaries.iter().map(|s| s.lemma3_failures).sum()
    }

    pub fn total_in_event_steps(&self) -> u64 {
        self.summaries.iter().map(|s| s.in_event_steps).sum()
    }

    pub fn max_abs_logit_sum(&self) -> f64 {
        self.summaries
            .iter()
            .map(|s| s.max_abs_logit_sum)
            .fold(0.0, f64::max)
    }

    pub fn max_increment_ratio(&self) -> f64 {
        self.summaries
            .iter()
            .map(|s| s.max_increment_ratio)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::RewardDist;

    #[test]
    fn rejects_bad_horizons() {
        let inst = BanditInstance::bernoulli(vec![0.9, 0.4, 0.1]).unwrap();
        let rate = LearningRateSpec::Constant(0.1);
        let rec = RecordingOptions::default();
        assert!(matches!(
            run_episode(&inst, &rate, 0, 1, &rec),
            Err(Error::InvalidHorizon(_))
        ));
        assert!(matches!(
            run_episode(&inst, &rate, 2, 1, &rec),
            Err(Error::InvalidHorizon(_))
        ));
    }

    #[test]
    fn rejects_empty_batch() {
        let inst = BanditInstance::bernoulli(vec![0.9, 0.4]).unwrap();
        let exp = Experiment::new(
            inst,
            LearningRateSpec::Constant(0.1),
            10,
            RecordingOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            exp.run_batch(1, 0, Parallelism::Serial),
            Err(Error::InvalidBatch(_))
        ));
    }

    #[test]
    fn default_layout() {
        assert_eq!(default_stride(500), 1);
        assert_eq!(default_stride(100_000), 100);
        assert_eq!(default_checkpoints(10_000), vec![1000, 5000, 10_000]);
        let rec = RecordingOptions {
            checkpoints: Some(vec![50, 0, 10, 10, 200]),
            ..Default::default()
        };
        assert_eq!(rec.checkpoints_for(100), vec![10, 50]);
    }

    #[test]
    fn snapshots_follow_stride() {
        let inst = BanditInstance::with_family(vec![0.2, 0.8, 0.5], RewardDist::Bernoulli).unwrap();
        let rec = RecordingOptions {
            stride: Some(7),
            ..Default::default()
        };
        let traj = run_episode(&inst, &LearningRateSpec::Constant(0.05), 50, 3, &rec).unwrap();
        let ts: Vec<u64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![1, 8, 15, 22, 29, 36, 43, 50]);
        assert_eq!(traj.steps.len(), 50);
        assert_eq!(traj.snapshots[0].theta, vec![0.0; 3]);
    }

    #[test]
    fn metadata_flags_regime() {
        let inst = BanditInstance::bernoulli(vec![0.9, 0.4]).unwrap();
        let rec = RecordingOptions::default();
        let auto = Experiment::new(
            inst.clone(),
            LearningRateSpec::TheoremAuto,
            100,
            rec.clone(),
        )
        .unwrap();
        assert!(auto.metadata().theorem_regime);
        let big = Experiment::new(inst, LearningRateSpec::Constant(0.1), 100, rec).unwrap();
        assert!(!big.metadata().theorem_regime);
    }
}
