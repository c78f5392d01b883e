//! Softmax policy gradient for stochastic k-armed bandits with bounded
//! rewards, plus exact and statistical checks of the quantities its regret
//! analysis depends on.
//!
//! - [`bandit`]: instances, gaps, softmax, sampling.
//! - [`agent`]: the update rule and learning-rate formulas.
//! - [`engine`]: seeded episodes and parallel batches.
//! - [`diagnostics`]: good event, pair margins, the potential and its drift.

pub mod agent;
pub mod bandit;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod fuzz;
pub mod rng;
pub mod stats;

pub use agent::{
    lemma2_learning_rate, pg_update, resolve_rate, theorem_learning_rate, AgentState,
    LearningRateSpec,
};
pub use bandit::{
    gap_profile, instantaneous_regret, sample_action, sample_reward, softmax, BanditInstance,
    GapProfile, LogitVector, PolicyVector, RewardDist,
};
pub use diagnostics::AnalysisParams;
pub use engine::{
    run_batch, run_episode, BatchResult, Experiment, Parallelism, RecordingOptions, RunSummary,
    StepRecord, Trajectory,
};
pub use error::{Error, Result};
pub use rng::{derive_seed, RandomStream};
