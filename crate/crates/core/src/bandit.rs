//! Bandit instances, gap structure, softmax policies and sampling primitives.
//!
//! Means are accepted in any order. [`GapProfile`] carries the permutation to
//! the sorted order `mu_1 >= mu_2 >= ... >= mu_k` that the analysis is written
//! in; everything facing the user (actions, logit snapshots) stays in the
//! order the means were given.

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Reward law of a single arm. Every variant has support in `[0, 1]` and mean
/// exactly equal to the arm's mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardDist {
    /// `Y ~ Bernoulli(mu)`.
    Bernoulli,
    /// `Y = mu` almost surely.
    PointMass,
    /// `Y ~ Uniform[mu - w, mu + w]` with `w = min(half_width, mu, 1 - mu)`,
    /// the widest symmetric interval around `mu` that stays inside `[0, 1]`.
    ClippedUniform { half_width: f64 },
}

impl RewardDist {
    pub fn name(&self) -> &'static str {
        match self {
            RewardDist::Bernoulli => "bernoulli",
            RewardDist::PointMass => "point_mass",
            RewardDist::ClippedUniform { .. } => "clipped_uniform",
        }
    }
}

/// A k-armed stochastic bandit with bounded rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    means: Vec<f64>,
    dists: Vec<RewardDist>,
}

impl BanditInstance {
    pub fn new(means: Vec<f64>, dists: Vec<RewardDist>) -> Result<Self> {
        if dists.len() != means.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: dists.len(),
            });
        }
        if means.len() < 2 {
            return Err(Error::TooFewArms(means.len()));
        }
        for (arm, &value) in means.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidMean { arm, value });
            }
        }
        for (arm, dist) in dists.iter().enumerate() {
            if let RewardDist::ClippedUniform { half_width } = *dist {
                if !half_width.is_finite() || half_width < 0.0 {
                    return Err(Error::InvalidDistribution {
                        arm,
                        reason: format!("half_width {half_width} must be finite and >= 0"),
                    });
                }
            }
        }
        let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = means.iter().copied().fold(f64::INFINITY, f64::min);
        if max == min {
            return Err(Error::AllArmsOptimal);
        }
        Ok(Self { means, dists })
    }

    /// Same reward family on every arm.
    pub fn with_family(means: Vec<f64>, dist: RewardDist) -> Result<Self> {
        let dists = vec![dist; means.len()];
        Self::new(means, dists)
    }

    pub fn bernoulli(means: Vec<f64>) -> Result<Self> {
        Self::with_family(means, RewardDist::Bernoulli)
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn dists(&self) -> &[RewardDist] {
        &self.dists
    }

    /// Finite support `(value, probability)` of an arm's reward, if it has one.
    pub fn reward_support(&self, arm: usize) -> Option<Vec<(f64, f64)>> {
        let mu = self.means[arm];
        match self.dists[arm] {
            RewardDist::Bernoulli => Some(vec![(0.0, 1.0 - mu), (1.0, mu)]),
            RewardDist::PointMass => Some(vec![(mu, 1.0)]),
            RewardDist::ClippedUniform { .. } => None,
        }
    }
}

/// Gaps of an instance in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    /// `sort_perm[i]` is the user arm at sorted position `i`.
    pub sort_perm: Vec<usize>,
    /// `rank[a]` is the sorted position of user arm `a`.
    pub rank: Vec<usize>,
    /// `delta[i] = mu_max - mu_{sort_perm[i]}`, nondecreasing.
    pub delta: Vec<f64>,
    /// Number of optimal arms.
    pub k_star: usize,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl GapProfile {
    pub fn k(&self) -> usize {
        self.delta.len()
    }

    /// User indices of the optimal arms.
    pub fn optimal_arms(&self) -> &[usize] {
        &self.sort_perm[..self.k_star]
    }

    pub fn is_optimal(&self, arm: usize) -> bool {
        self.rank[arm] < self.k_star
    }

    /// Gap of a user-order arm.
    pub fn gap_of(&self, arm: usize) -> f64 {
        self.delta[self.rank[arm]]
    }

    /// Reorders a user-order vector into sorted order.
    pub fn to_sorted(&self, user: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; user.len()];
        self.sort_into(user, &mut out);
        out
    }

    /// Allocation-free variant of [`GapProfile::to_sorted`].
    pub fn sort_into(&self, user: &[f64], sorted: &mut [f64]) {
        for (slot, &arm) in sorted.iter_mut().zip(&self.sort_perm) {
            *slot = user[arm];
        }
    }
}

/// Sorts the arms and computes the gap structure. Ties count as optimal only
/// under exact equality with the best mean.
pub fn gap_profile(instance: &BanditInstance) -> Result<GapProfile> {
    let means = instance.means();
    let mut sort_perm: Vec<usize> = (0..means.len()).collect();
    // stable: equal means keep user order
    sort_perm.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    let best = means[sort_perm[0]];
    let delta: Vec<f64> = sort_perm.iter().map(|&a| best - means[a]).collect();
    let k_star = delta.iter().take_while(|&&d| d == 0.0).count();
    if k_star == means.len() {
        return Err(Error::AllArmsOptimal);
    }
    let mut rank = vec![0; means.len()];
    for (i, &a) in sort_perm.iter().enumerate() {
        rank[a] = i;
    }
    Ok(GapProfile {
        delta_min: delta[k_star],
        delta_max: delta[delta.len() - 1],
        sort_perm,
        rank,
        delta,
        k_star,
    })
}

/// Real-valued logits, one per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(pub Vec<f64>);

impl LogitVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// A probability vector over arms.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyVector(Vec<f64>);

impl PolicyVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    /// Validates strictly positive entries summing to one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPolicy("empty".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::InvalidPolicy(format!(
                "entry {i} is {p}, must be finite and > 0"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidPolicy(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reorders into sorted arm order.
    pub fn to_sorted(&self, gaps: &GapProfile) -> PolicyVector {
        PolicyVector(gaps.to_sorted(&self.0))
    }
}

/// Max-subtracted softmax.
pub fn softmax(theta: &LogitVector) -> Result<PolicyVector> {
    let mut out = vec![0.0; theta.len()];
    softmax_into(theta.as_slice(), &mut out)?;
    Ok(PolicyVector(out))
}

/// Writes `softmax(theta)` into `out`.
pub fn softmax_into(theta: &[f64], out: &mut [f64]) -> Result<()> {
    if theta.len() != out.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: out.len(),
        });
    }
    let mut max = f64::NEG_INFINITY;
    for (index, &value) in theta.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteLogit { index, value });
        }
        max = max.max(value);
    }
    let mut total = 0.0;
    for (p, &t) in out.iter_mut().zip(theta) {
        *p = (t - max).exp();
        total += *p;
    }
    for p in out.iter_mut() {
        *p /= total;
    }
    Ok(())
}

/// Inverse-CDF draw over the stored arm order. Consumes exactly one uniform.
pub fn sample_action(policy: &PolicyVector, rng: &mut RandomStream) -> usize {
    sample_index(policy.probs(), rng)
}

pub(crate) fn sample_index(probs: &[f64], rng: &mut RandomStream) -> usize {
    let u = rng.next_f64();
    let mut cum = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return a;
        }
    }
    // rounding left the cumulative sum just below 1
    probs.len() - 1
}

/// Draws a reward for `action`. Consumes exactly one uniform whatever the family.
pub fn sample_reward(
    instance: &BanditInstance,
    action: usize,
    rng: &mut RandomStream,
) -> Result<f64> {
    if action >= instance.k() {
        return Err(Error::InvalidAction {
            action,
            k: instance.k(),
        });
    }
    let mu = instance.means[action];
    let u = rng.next_f64();
    Ok(match instance.dists[action] {
        RewardDist::Bernoulli => {
            if u < mu {
                1.0
            } else {
                0.0
            }
        }
        RewardDist::PointMass => mu,
        RewardDist::ClippedUniform { half_width } => {
            let w = half_width.min(mu).min(1.0 - mu);
            (mu + w * (2.0 * u - 1.0)).clamp(0.0, 1.0)
        }
    })
}

/// `R = <pi, delta>` with both in sorted order.
pub fn instantaneous_regret(policy: &PolicyVector, gaps: &GapProfile) -> Result<f64> {
    if policy.len() != gaps.k() {
        return Err(Error::DimensionMismatch {
            expected: gaps.k(),
            got: policy.len(),
        });
    }
    Ok(dot(policy.probs(), &gaps.delta))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaps_with_tied_optimal_arms() {
        let inst = BanditInstance::bernoulli(vec![0.9, 0.9, 0.4, 0.1]).unwrap();
        let g = gap_profile(&inst).unwrap();
        assert_eq!(g.k_star, 2);
        assert_eq!(g.sort_perm, vec![0, 1, 2, 3]);
        for (d, e) in g.delta.iter().zip([0.0, 0.0, 0.5, 0.8]) {
            assert!(approx(*d, e, 1e-15));
        }
        assert!(approx(g.delta_min, 0.5, 1e-15));
        assert!(approx(g.delta_max, 0.8, 1e-15));
    }

    #[test]
    fn gaps_unsorted_means() {
        let inst = BanditInstance::bernoulli(vec![0.4, 0.9]).unwrap();
        let g = gap_profile(&inst).unwrap();
        // 1-based (2, 1)
        assert_eq!(g.sort_perm, vec![1, 0]);
        assert_eq!(g.rank, vec![1, 0]);
        assert_eq!(g.k_star, 1);
        assert!(approx(g.delta_min, 0.5, 1e-15));
        assert_eq!(g.delta_min, g.delta_max);
        assert!(g.is_optimal(1) && !g.is_optimal(0));
        assert_eq!(g.gap_of(0), g.delta_max);
    }

    #[test]
    fn equal_means_rejected() {
        assert_eq!(
            BanditInstance::bernoulli(vec![0.5, 0.5]).unwrap_err(),
            Error::AllArmsOptimal
        );
    }

    #[test]
    fn instance_validation() {
        assert!(matches!(
            BanditInstance::bernoulli(vec![0.5, 1.2]),
            Err(Error::InvalidMean { arm: 1, .. })
        ));
        assert!(matches!(
            BanditInstance::bernoulli(vec![0.5]),
            Err(Error::TooFewArms(1))
        ));
        assert!(matches!(
            BanditInstance::with_family(
                vec![0.5, 0.1],
                RewardDist::ClippedUniform { half_width: -1.0 }
            ),
            Err(Error::InvalidDistribution { .. })
        ));
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&LogitVector(vec![0.0, 0.0])).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
        let p = softmax(&LogitVector(vec![5.0, 5.0, 5.0])).unwrap();
        for &x in p.probs() {
            assert!(approx(x, 1.0 / 3.0, 1e-16));
        }
        // e/(e+1) evaluated at 40 digits
        let p = softmax(&LogitVector(vec![1.0, 0.0])).unwrap();
        assert!(approx(p.probs()[0], 0.731_058_578_630_004_879_3, 1e-15));
        assert!(approx(p.probs()[1], 0.268_941_421_369_995_120_7, 1e-15));
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(
            softmax(&LogitVector(vec![0.0, f64::NAN])),
            Err(Error::NonFiniteLogit { index: 1, .. })
        ));
        assert!(softmax(&LogitVector(vec![f64::INFINITY, 0.0])).is_err());
    }

    #[test]
    fn softmax_large_logits_do_not_overflow() {
        let p = softmax(&LogitVector(vec![1000.0, 999.0])).unwrap();
        assert!(approx(p.probs()[0], 0.731_058_578_630_004_879_3, 1e-15));
    }

    #[test]
    fn policy_validation() {
        assert!(PolicyVector::new(vec![1.0, 0.0]).is_err());
        assert!(PolicyVector::new(vec![0.5, 0.6]).is_err());
        assert!(PolicyVector::new(vec![0.999_999, 1e-6]).is_ok());
    }

    #[test]
    fn inverse_cdf_sampling() {
        let p = PolicyVector::new(vec![0.999_999, 1e-6]).unwrap();
        let mut rng = RandomStream::from_seed(9);
        // u < 0.999999 unless the draw lands in the top 1e-6 of [0,1)
        let mut ones = 0;
        for _ in 0..10_000 {
            if sample_action(&p, &mut rng) == 0 {
                ones += 1;
            }
        }
        assert!(ones >= 9_990);
    }

    #[test]
    fn sampling_frequencies_uniform_four_arms() {
        let p = PolicyVector::new(vec![0.25; 4]).unwrap();
        let mut rng = RandomStream::from_seed(2024);
        let mut counts = [0usize; 4];
        let draws = 1_000_000;
        for _ in 0..draws {
            counts[sample_action(&p, &mut rng)] += 1;
        }
        // 4 sigma of a binomial proportion: 4*sqrt(0.25*0.75/1e6) = 1.73e-3
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 0.002);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = PolicyVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let run = |seed| {
            let mut rng = RandomStream::from_seed(seed);
            (0..500)
                .map(|_| sample_action(&p, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(77), run(77));
    }

    fn reward_mean(dist: RewardDist, mu: f64, seed: u64) -> (f64, f64, f64) {
        let inst = BanditInstance::new(vec![mu, 0.0], vec![dist, RewardDist::PointMass]).unwrap();
        let mut rng = RandomStream::from_seed(seed);
        let draws = 100_000;
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..draws {
            let y = sample_reward(&inst, 0, &mut rng).unwrap();
            sum += y;
            lo = lo.min(y);
            hi = hi.max(y);
        }
        (sum / draws as f64, lo, hi)
    }

    #[test]
    fn reward_families() {
        let (mean, lo, hi) = reward_mean(RewardDist::PointMass, 0.7, 1);
        assert_eq!((lo, hi), (0.7, 0.7));
        assert!(approx(mean, 0.7, 1e-10));

        // 4 sigma: 4*sqrt(0.09/1e5) = 3.8e-3
        let (mean, lo, hi) = reward_mean(RewardDist::Bernoulli, 0.9, 2);
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(approx(mean, 0.9, 0.004));

        // U[0,1]: 4*sqrt(1/12/1e5) = 3.7e-3
        let (mean, lo, hi) = reward_mean(RewardDist::ClippedUniform { half_width: 0.5 }, 0.5, 3);
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(approx(mean, 0.5, 0.004));

        // half-width clipped to 0.1 so support stays in [0, 1]
        let (mean, lo, hi) = reward_mean(RewardDist::ClippedUniform { half_width: 0.5 }, 0.9, 4);
        assert!(lo >= 0.8 && hi <= 1.0);
        assert!(approx(mean, 0.9, 0.004));
    }

    #[test]
    fn reward_rejects_bad_action() {
        let inst = BanditInstance::bernoulli(vec![0.1, 0.2]).unwrap();
        let mut rng = RandomStream::from_seed(0);
        assert!(matches!(
            sample_reward(&inst, 2, &mut rng),
            Err(Error::InvalidAction { action: 2, k: 2 })
        ));
    }

    #[test]
    fn regret_examples() {
        let g2 = gap_profile(&BanditInstance::bernoulli(vec![0.9, 0.4]).unwrap()).unwrap();
        let r = instantaneous_regret(&PolicyVector::new(vec![0.5, 0.5]).unwrap(), &g2).unwrap();
        assert!(approx(r, 0.25, 1e-15));

        let r = instantaneous_regret(&PolicyVector::new(vec![1.0 - 1e-300, 1e-300]).unwrap(), &g2)
            .unwrap();
        assert!(r < 1e-299);

        let g3 = gap_profile(&BanditInstance::bernoulli(vec![0.9, 0.4, 0.1]).unwrap()).unwrap();
        let r =
            instantaneous_regret(&PolicyVector::new(vec![0.2, 0.3, 0.5]).unwrap(), &g3).unwrap();
        assert!(approx(r, 0.55, 1e-15));

        assert!(matches!(
            instantaneous_regret(&PolicyVector::new(vec![0.5, 0.5]).unwrap(), &g3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn regret_exactly_zero_on_optimal_support() {
        // mass on the two tied optimal arms only (third entry is the minimum
        // positive value, contributing below 1e-300)
        let g = gap_profile(&BanditInstance::bernoulli(vec![0.9, 0.9, 0.4]).unwrap()).unwrap();
        let p = PolicyVector(vec![0.5, 0.5, 0.0]);
        assert_eq!(instantaneous_regret(&p, &g).unwrap(), 0.0);
    }
}
