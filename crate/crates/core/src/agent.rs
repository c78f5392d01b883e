//! Softmax policy gradient with a constant (or scheduled) learning rate.
//!
//! Starting from `theta_1 = 0`, each round samples `A_t ~ softmax(theta_t)`,
//! observes `Y_t` and moves every logit by
//!
//! ```text
//! theta_{t+1,a} = theta_{t,a} + eta * (1{A_t = a} - pi_{t,a}) * Y_t
//! ```
//!
//! The increments sum to zero, so the logits stay centred. Nothing re-centres
//! them; the conservation checks in [`crate::diagnostics`] see the raw sum.

use crate::bandit::{softmax_into, GapProfile, LogitVector, PolicyVector};
use crate::error::{Error, Result};

/// How the learning rate is chosen in each round.
#[derive(Debug, Clone, PartialEq)]
pub enum LearningRateSpec {
    Constant(f64),
    /// `delta_min^2 / (120 delta_max ln(nk))`, resolved once the gaps and horizon are known.
    TheoremAuto,
    /// Piecewise-constant, nondecreasing `(first_round, eta)` breakpoints. The first
    /// breakpoint must be round 1.
    Schedule(Vec<(u64, f64)>),
}

impl LearningRateSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |eta: f64| eta.is_finite() && eta > 0.0;
        match self {
            LearningRateSpec::Constant(eta) if !positive(*eta) => Err(Error::InvalidRate(format!(
                "eta = {eta}, must be finite and > 0"
            ))),
            LearningRateSpec::Schedule(points) => {
                let Some(&(first, _)) = points.first() else {
                    return Err(Error::InvalidRate("empty schedule".into()));
                };
                if first != 1 {
                    return Err(Error::InvalidRate(format!(
                        "schedule must start at round 1, starts at {first}"
                    )));
                }
                if let Some(&(_, eta)) = points.iter().find(|(_, eta)| !positive(*eta)) {
                    return Err(Error::InvalidRate(format!(
                        "schedule rate {eta} must be > 0"
                    )));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidRate("schedule rounds must increase".into()));
                    }
                    if w[1].1 < w[0].1 {
                        return Err(Error::InvalidRate(
                            "schedule rates must be nondecreasing".into(),
                        ));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Replaces `TheoremAuto` by the constant it stands for.
    pub fn resolved(&self, gaps: &GapProfile, n: u64) -> Result<LearningRateSpec> {
        self.validate()?;
        Ok(match self {
            LearningRateSpec::TheoremAuto => {
                LearningRateSpec::Constant(theorem_learning_rate(gaps, n, gaps.k())?)
            }
            other => other.clone(),
        })
    }

    /// Largest rate used over the run (the last breakpoint for schedules).
    pub fn max_rate(&self, gaps: Option<&GapProfile>, n: Option<u64>) -> Result<f64> {
        match self {
            LearningRateSpec::Schedule(points) => points
                .last()
                .map(|p| p.1)
                .ok_or_else(|| Error::InvalidRate("empty schedule".into())),
            _ => resolve_rate(self, 1, gaps, n),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LearningRateSpec::Constant(eta) => format!("constant({eta:e})"),
            LearningRateSpec::TheoremAuto => "theorem_auto".into(),
            LearningRateSpec::Schedule(points) => {
                let parts: Vec<String> = points.iter().map(|(r, e)| format!("{r}:{e:e}")).collect();
                format!("schedule({})", parts.join(";"))
            }
        }
    }
}

/// `delta_min^2 / (120 delta_max ln(n k))`, natural log.
pub fn theorem_learning_rate(gaps: &GapProfile, n: u64, k: usize) -> Result<f64> {
    let nk = n as f64 * k as f64;
    if nk <= 1.0 {
        return Err(Error::InvalidHorizon(format!("n*k = {nk} must exceed 1")));
    }
    Ok(gaps.delta_min * gaps.delta_min / (120.0 * gaps.delta_max * nk.ln()))
}

/// `delta_min^2 / (40 delta_max ln(n^2 / delta))`, natural log.
pub fn lemma2_learning_rate(gaps: &GapProfile, n: u64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfidence(delta));
    }
    if n < 2 {
        return Err(Error::InvalidHorizon(format!("n = {n}, need n >= 2")));
    }
    let n = n as f64;
    let log_term = 2.0 * n.ln() - delta.ln();
    Ok(gaps.delta_min * gaps.delta_min / (40.0 * gaps.delta_max * log_term))
}

/// Learning rate in force at `round`.
pub fn resolve_rate(
    spec: &LearningRateSpec,
    round: u64,
    gaps: Option<&GapProfile>,
    n: Option<u64>,
) -> Result<f64> {
    match spec {
        LearningRateSpec::Constant(eta) => Ok(*eta),
        LearningRateSpec::TheoremAuto => match (gaps, n) {
            (Some(g), Some(n)) => theorem_learning_rate(g, n, g.k()),
            _ => Err(Error::UnresolvedRate),
        },
        LearningRateSpec::Schedule(points) => {
            let idx = points.partition_point(|&(start, _)| start <= round);
            if idx == 0 {
                return Err(Error::InvalidRate(format!(
                    "no schedule breakpoint at or before round {round}"
                )));
            }
            Ok(points[idx - 1].1)
        }
    }
}

/// Logits, round counter and learning rate of one learner.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub theta: LogitVector,
    pub round: u64,
    pub rate: LearningRateSpec,
}

impl AgentState {
    /// `theta = 0`, round 1. `TheoremAuto` must be resolved first
    /// ([`LearningRateSpec::resolved`]).
    pub fn new(k: usize, rate: LearningRateSpec) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewArms(k));
        }
        if rate == LearningRateSpec::TheoremAuto {
            return Err(Error::UnresolvedRate);
        }
        rate.validate()?;
        Ok(Self {
            theta: LogitVector::zeros(k),
            round: 1,
            rate,
        })
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    pub fn current_rate(&self) -> Result<f64> {
        resolve_rate(&self.rate, self.round, None, None)
    }

    pub fn policy(&self) -> Result<PolicyVector> {
        crate::bandit::softmax(&self.theta)
    }

    /// Applies one update with `pi = softmax(theta)`. Returns the rate used.
    pub fn update(&mut self, action: usize, reward: f64) -> Result<f64> {
        let mut pi = vec![0.0; self.k()];
        softmax_into(self.theta.as_slice(), &mut pi)?;
        self.update_with_policy(action, reward, &pi)
    }

    /// Update given the policy already computed from the current logits.
    pub(crate) fn update_with_policy(
        &mut self,
        action: usize,
        reward: f64,
        pi: &[f64],
    ) -> Result<f64> {
        let k = self.k();
        if action >= k {
            return Err(Error::InvalidAction { action, k });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::InvalidReward(reward));
        }
        let eta = self.current_rate()?;
        let scale = eta * reward;
        for (a, (t, &p)) in self.theta.0.iter_mut().zip(pi).enumerate() {
            let indicator = if a == action { 1.0 } else { 0.0 };
            *t += scale * (indicator - p);
        }
        self.round += 1;
        Ok(eta)
    }
}

/// Value-style update: returns the next state.
pub fn pg_update(state: &AgentState, action: usize, reward: f64) -> Result<AgentState> {
    let mut next = state.clone();
    next.update(action, reward)?;
    Ok(next)
}
