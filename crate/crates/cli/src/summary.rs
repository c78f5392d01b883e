//! Batch summaries: regret at checkpoints, bound shapes, event frequencies.

use pg_bandit_core::diagnostics::{event_frequency, EventEstimate, EventKind};
use pg_bandit_core::engine::CheckpointAggregate;
use pg_bandit_core::{BatchResult, Error};

use crate::config::ExperimentConfig;

/// Empirical mean regret against the two regret-bound shapes, both without
/// their unknown constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundComparison {
    pub empirical_mean_regret: f64,
    /// `k ln(n) ln(k) / eta`
    pub refined_bound_shape: f64,
    /// `k^2 ln(n) / eta`
    pub coarse_bound_shape: f64,
    pub refined_ratio: f64,
    pub coarse_ratio: f64,
}

impl BoundComparison {
    pub fn new(empirical_mean_regret: f64, k: usize, n: u64, eta: f64) -> Self {
        let (kf, ln_n) = (k as f64, (n as f64).ln());
        let refined = kf * ln_n * (k.max(2) as f64).ln() / eta;
        let coarse = kf * kf * ln_n / eta;
        Self {
            empirical_mean_regret,
            refined_bound_shape: refined,
            coarse_bound_shape: coarse,
            refined_ratio: empirical_mean_regret / refined,
            coarse_ratio: empirical_mean_regret / coarse,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub runs: usize,
    pub checkpoints: Vec<CheckpointAggregate>,
    pub bounds: BoundComparison,
    pub events: Vec<EventEstimate>,
    /// Total regret in `(n/2, n]` over total regret in `(0, n/2]`.
    pub sublinearity_indicator: f64,
    pub fraction_second_half_smaller: f64,
    pub lemma3_failures: u64,
    pub in_event_steps: u64,
    pub max_abs_logit_sum: f64,
    pub max_increment_ratio: f64,
}

pub fn summarize_batch(
    batch: &BatchResult,
    config: &ExperimentConfig,
) -> Result<BatchSummary, Error> {
    if batch.summaries.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let events = [
        EventKind::MinLogitBreach,
        EventKind::PairMarginBreach,
        EventKind::GBreach,
    ]
    .into_iter()
    .map(|e| event_frequency(batch, e))
    .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchSummary {
        runs: batch.runs(),
        checkpoints: batch.aggregates.clone(),
        bounds: BoundComparison::new(
            batch.final_pseudo().mean,
            batch.k,
            batch.n,
            config.bound_rate(),
        ),
        events,
        sublinearity_indicator: batch.sublinearity_indicator(),
        fraction_second_half_smaller: batch.fraction_second_half_smaller(),
        lemma3_failures: batch.total_lemma3_failures(),
        in_event_steps: batch.total_in_event_steps(),
        max_abs_logit_sum: batch.max_abs_logit_sum(),
        max_increment_ratio: batch.max_increment_ratio(),
    })
}
