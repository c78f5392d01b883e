use thiserror::Error;

/// Errors raised by the bandit model, the agent, the simulator and the checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mean of arm {arm} is {value}, expected a value in [0, 1]")]
    InvalidMean { arm: usize, value: f64 },

    #[error("all arms have the same mean; at least one arm must be strictly suboptimal")]
    AllArmsOptimal,

    #[error("need at least 2 arms, got {0}")]
    TooFewArms(usize),

    #[error("invalid reward distribution for arm {arm}: {reason}")]
    InvalidDistribution { arm: usize, reason: String },

    #[error("logit {index} is not finite ({value})")]
    NonFiniteLogit { index: usize, value: f64 },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("reward {0} outside [0, 1]")]
    InvalidReward(f64),

    #[error("action {action} out of range for {k} arms")]
    InvalidAction { action: usize, k: usize },

    #[error("invalid learning rate: {0}")]
    InvalidRate(String),

    #[error("theorem_auto learning rate needs the gap profile and the horizon")]
    UnresolvedRate,

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("confidence level {0} outside (0, 1)")]
    InvalidConfidence(f64),

    #[error("{what}: argument {value} outside the domain (must exceed {bound})")]
    Domain {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("arm {0} has a reward distribution without finite support")]
    UnsupportedDistribution(usize),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("trajectory has no good-event flags")]
    MissingFlags,

    #[error("invalid batch options: {0}")]
    InvalidBatch(String),

    #[error("run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
