//! Checks for the quantities the regret analysis relies on.
//!
//! Logit and policy vectors passed here are in sorted arm order (see
//! [`GapProfile::to_sorted`]): the first `k*` entries are the optimal arms.
//!
//! With `L = ln(n / delta)`:
//!
//! ```text
//! G        = { min_c theta_c >= -L  and  theta_b >= theta_a - 1 for b optimal, a suboptimal }
//! Z        = min_{b optimal, a suboptimal} (theta_b - theta_a)
//! psi(u)   = 9 k L ln((u / k* + 1 + L) / (1 + L))
//! psi'(u)  = 9 k L / (u + k* + k* L)
//! ```
//!
//! On `G`, `theta* = sum of optimal logits` lies in `[-k*, k L]` and
//! `1 / pi* <= psi'(theta*)`.

use crate::bandit::{softmax_into, BanditInstance, GapProfile, LogitVector};
use crate::engine::{BatchResult, Trajectory};
use crate::error::{Error, Result};
use crate::stats::{wilson_interval, Z_95};

/// Slack for comparisons that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;

/// Horizon and confidence used by the event thresholds and the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub n: u64,
    pub delta: f64,
    pub k: usize,
    pub k_star: usize,
    /// `ln(n / delta)`.
    pub log_term: f64,
}

impl AnalysisParams {
    /// `delta` defaults to `1 / (k^2 n)`.
    pub fn new(n: u64, delta: Option<f64>, gaps: &GapProfile) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidHorizon("n must be positive".into()));
        }
        let k = gaps.k();
        let delta = delta.unwrap_or_else(|| default_delta(k, n));
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfidence(delta));
        }
        let log_term = (n as f64).ln() - delta.ln();
        if log_term.is_nan() || log_term <= 0.0 {
            return Err(Error::PreconditionViolated(format!(
                "ln(n / delta) = {log_term} must be positive"
            )));
        }
        Ok(Self {
            n,
            delta,
            k,
            k_star: gaps.k_star,
            log_term,
        })
    }

    /// Ceiling for "some arm's logit dropped to -L" (union over arms).
    pub fn min_logit_ceiling(&self) -> f64 {
        self.k as f64 * self.delta
    }

    /// Ceiling for "some pair margin dropped to -1" (union over pairs).
    pub fn pair_margin_ceiling(&self) -> f64 {
        (self.k_star * (self.k - self.k_star)) as f64 * self.delta
    }

    /// Ceiling for `tau < n`.
    pub fn g_breach_ceiling(&self) -> f64 {
        self.min_logit_ceiling() + self.pair_margin_ceiling()
    }

    fn pole(&self) -> f64 {
        -(self.k_star as f64) * (1.0 + self.log_term)
    }
}

pub fn default_delta(k: usize, n: u64) -> f64 {
    1.0 / ((k * k) as f64 * n as f64)
}

pub fn check_conservation(theta: &LogitVector, tolerance: f64) -> bool {
    theta.sum().abs() <= tolerance
}

/// `min_{b < k*, a >= k*} theta_b - theta_a`.
pub fn pair_margin(theta: &[f64], gaps: &GapProfile) -> f64 {
    let (opt, sub) = theta.split_at(gaps.k_star);
    let worst_opt = opt.iter().copied().fold(f64::INFINITY, f64::min);
    let best_sub = sub.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    worst_opt - best_sub
}

pub fn min_logit(theta: &[f64]) -> f64 {
    theta.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Membership in the good event.
pub fn g_event(theta: &[f64], gaps: &GapProfile, params: &AnalysisParams) -> bool {
    g_event_from_parts(min_logit(theta), pair_margin(theta, gaps), params)
}

pub(crate) fn g_event_from_parts(
    min_logit: f64,
    pair_margin: f64,
    params: &AnalysisParams,
) -> bool {
    min_logit >= -params.log_term && pair_margin >= -1.0
}

fn check_domain(what: &'static str, u: f64, params: &AnalysisParams) -> Result<()> {
    let pole = params.pole();
    if u > pole {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: u,
            bound: pole,
        })
    }
}

/// The potential `psi`.
pub fn psi(u: f64, params: &AnalysisParams) -> Result<f64> {
    check_domain("psi", u, params)?;
    let l = params.log_term;
    let ks = params.k_star as f64;
    Ok(9.0 * params.k as f64 * l * ((u / ks + 1.0 + l) / (1.0 + l)).ln())
}

pub fn psi_prime(u: f64, params: &AnalysisParams) -> Result<f64> {
    check_domain("psi_prime", u, params)?;
    let ks = params.k_star as f64;
    Ok(9.0 * params.k as f64 * params.log_term / (u + ks + ks * params.log_term))
}

/// `psi''(u) = -psi'(u) / (u + k* + k* L)`.
pub fn psi_second(u: f64, params: &AnalysisParams) -> Result<f64> {
    let ks = params.k_star as f64;
    Ok(-psi_prime(u, params)? / (u + ks + ks * params.log_term))
}

/// `psi(u + d) - psi(u)` without cancellation.
pub fn psi_increment(u: f64, d: f64, params: &AnalysisParams) -> Result<f64> {
    check_domain("psi", u, params)?;
    check_domain("psi", u + d, params)?;
    let ks = params.k_star as f64;
    let scale = u + ks + ks * params.log_term;
    Ok(9.0 * params.k as f64 * params.log_term * (d / scale).ln_1p())
}

/// Outcome of the bound `1/pi* <= 9 k L / (theta* + k* + k* L)` and the range
/// `theta* in [-k*, k L]` at one in-event state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma3Record {
    pub theta_star: f64,
    pub pi_star: f64,
    pub inv_pi_star: f64,
    pub bound: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    pub in_range: bool,
    pub bound_holds: bool,
}

impl Lemma3Record {
    pub fn passed(&self) -> bool {
        self.in_range && self.bound_holds
    }
}

pub fn lemma3_check(
    theta: &[f64],
    gaps: &GapProfile,
    params: &AnalysisParams,
) -> Result<Lemma3Record> {
    if theta.len() != gaps.k() {
        return Err(Error::DimensionMismatch {
            expected: gaps.k(),
            got: theta.len(),
        });
    }
    if !g_event(theta, gaps, params) {
        return Err(Error::PreconditionViolated(
            "state is outside the good event".into(),
        ));
    }
    let mut pi = vec![0.0; theta.len()];
    softmax_into(theta, &mut pi)?;
    let ks = gaps.k_star;
    let theta_star: f64 = theta[..ks].iter().sum();
    let pi_star: f64 = pi[..ks].iter().sum();
    let inv_pi_star = 1.0 / pi_star;
    let bound = psi_prime(theta_star, params)?;
    let range_lo = -(ks as f64);
    let range_hi = params.k as f64 * params.log_term;
    // EXACT_TOL absorbs the rounding in sum(theta) = 0
    let in_range = theta_star >= range_lo - EXACT_TOL && theta_star <= range_hi + EXACT_TOL;
    let bound_holds = inv_pi_star <= bound * (1.0 + EXACT_TOL);
    Ok(Lemma3Record {
        theta_star,
        pi_star,
        inv_pi_star,
        bound,
        range_lo,
        range_hi,
        in_range,
        bound_holds,
    })
}

/// Exact one-step moments of `D = theta*_{t+1} - theta*_t` and of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftReport {
    pub theta_star: f64,
    pub pi_star: f64,
    pub inst_regret: f64,
    /// `E[D]` by enumeration.
    pub expected_increment: f64,
    /// `eta pi* R`.
    pub closed_form_increment: f64,
    /// `E[D^2]` by enumeration.
    pub second_moment: f64,
    /// `eta^2 pi* (1 - pi*)`.
    pub second_moment_bound: f64,
    /// Potential fields are NaN off the good event.
    pub psi_before: f64,
    pub psi_expected_after: f64,
    /// `E[psi(theta*')] - psi(theta*)`, summed from per-outcome increments.
    pub psi_drift: f64,
    /// `eta psi'(theta*) pi* R / 2`.
    pub drift_lower_bound: f64,
    /// `eta R / 2`.
    pub regret_drift_bound: f64,
    pub in_event: bool,
}

impl DriftReport {
    pub fn identity_holds(&self, tol: f64) -> bool {
        (self.expected_increment - self.closed_form_increment).abs() <= tol
    }

    pub fn second_moment_holds(&self, tol: f64) -> bool {
        self.second_moment <= self.second_moment_bound + tol
    }

    /// `None` off the good event, where no drift bound is claimed.
    pub fn drift_holds(&self, tol: f64) -> Option<bool> {
        self.in_event.then_some(
            self.psi_drift >= self.drift_lower_bound - tol
                && self.psi_drift >= self.regret_drift_bound - tol,
        )
    }
}

/// Enumerates every (action, reward) outcome from the sorted-order logits
/// `theta`. Requires finite reward support and `eta <= delta_min / 4`.
pub fn one_step_drift(
    instance: &BanditInstance,
    theta: &[f64],
    eta: f64,
    gaps: &GapProfile,
    params: &AnalysisParams,
) -> Result<DriftReport> {
    let k = gaps.k();
    if theta.len() != k || instance.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: theta.len(),
        });
    }
    if !(eta > 0.0 && eta <= gaps.delta_min / 4.0) {
        return Err(Error::PreconditionViolated(format!(
            "eta = {eta} must lie in (0, delta_min / 4 = {}]",
            gaps.delta_min / 4.0
        )));
    }
    let supports = gaps
        .sort_perm
        .iter()
        .map(|&arm| {
            instance
                .reward_support(arm)
                .ok_or(Error::UnsupportedDistribution(arm))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pi = vec![0.0; k];
    softmax_into(theta, &mut pi)?;
    let ks = gaps.k_star;
    let theta_star: f64 = theta[..ks].iter().sum();
    let pi_star: f64 = pi[..ks].iter().sum();
    let inst_regret = crate::bandit::dot(&pi, &gaps.delta);
    let in_event = g_event(theta, gaps, params);

    let mut expected_increment = 0.0;
    let mut second_moment = 0.0;
    // the potential is only evaluated on the good event, where theta* >= -k*
    let mut psi_drift = if in_event { 0.0 } else { f64::NAN };
    for (i, support) in supports.iter().enumerate() {
        let direction = if i < ks { 1.0 - pi_star } else { -pi_star };
        for &(y, p) in support {
            let weight = pi[i] * p;
            if weight == 0.0 {
                continue;
            }
            let d = eta * y * direction;
            expected_increment += weight * d;
            second_moment += weight * d * d;
            if in_event {
                psi_drift += weight * psi_increment(theta_star, d, params)?;
            }
        }
    }

    let (psi_before, psi_slope) = if in_event {
        (psi(theta_star, params)?, psi_prime(theta_star, params)?)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(DriftReport {
        theta_star,
        pi_star,
        inst_regret,
        expected_increment,
        closed_form_increment: eta * pi_star * inst_regret,
        second_moment,
        second_moment_bound: eta * eta * pi_star * (1.0 - pi_star),
        psi_before,
        psi_expected_after: psi_before + psi_drift,
        psi_drift,
        drift_lower_bound: eta * psi_slope * pi_star * inst_regret / 2.0,
        regret_drift_bound: eta * inst_regret / 2.0,
        in_event,
    })
}

/// `min(n, first t with G_{t+1} false)` from per-round flags, where
/// `flags[t - 1]` is the flag of `theta_t`.
pub fn stopping_time_from_flags(flags: &[bool]) -> Result<u64> {
    if flags.is_empty() {
        return Err(Error::MissingFlags);
    }
    let n = flags.len() as u64;
    Ok(flags
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, ok)| !**ok)
        .map(|(idx, _)| idx as u64)
        .unwrap_or(n))
}

pub fn stopping_time(trajectory: &Trajectory) -> Result<u64> {
    let flags: Vec<bool> = trajectory.steps.iter().map(|s| s.g_event).collect();
    stopping_time_from_flags(&flags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Some logit reached `-ln(n / delta)` within the horizon.
    MinLogitBreach,
    /// Some optimal-minus-suboptimal logit gap reached `-1`.
    PairMarginBreach,
    /// The good event failed before the horizon (`tau < n`).
    GBreach,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::MinLogitBreach => "min_logit_breach",
            EventKind::PairMarginBreach => "pair_margin_breach",
            EventKind::GBreach => "g_breach",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventEstimate {
    pub event: EventKind,
    pub count: u64,
    pub runs: u64,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub ceiling: f64,
}

impl EventEstimate {
    /// No occurrences, or the 95% Wilson lower end at or under the ceiling.
    pub fn within_ceiling(&self) -> bool {
        self.count == 0 || self.wilson_lo <= self.ceiling
    }
}

pub fn event_frequency(batch: &BatchResult, event: EventKind) -> Result<EventEstimate> {
    if batch.summaries.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let params = &batch.params;
    let (count, ceiling) = match event {
        EventKind::MinLogitBreach => (
            batch
                .summaries
                .iter()
                .filter(|s| s.min_min_logit <= -params.log_term)
                .count(),
            params.min_logit_ceiling(),
        ),
        EventKind::PairMarginBreach => (
            batch
                .summaries
                .iter()
                .filter(|s| s.min_pair_margin <= -1.0)
                .count(),
            params.pair_margin_ceiling(),
        ),
        EventKind::GBreach => (
            batch.summaries.iter().filter(|s| s.tau < batch.n).count(),
            params.g_breach_ceiling(),
        ),
    };
    let runs = batch.summaries.len() as u64;
    let (wilson_lo, wilson_hi) = wilson_interval(count as u64, runs, Z_95);
    Ok(EventEstimate {
        event,
        count: count as u64,
        runs,
        rate: count as f64 / runs as f64,
        wilson_lo,
        wilson_hi,
        ceiling,
    })
}
