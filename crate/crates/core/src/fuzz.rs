//! Random instances and random good-event states for the fuzz checks.

use crate::bandit::{gap_profile, BanditInstance, GapProfile};
use crate::diagnostics::{g_event, AnalysisParams};
use crate::error::Result;
use crate::rng::RandomStream;

/// A random Bernoulli instance in sorted order with its analysis parameters.
#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub instance: BanditInstance,
    pub gaps: GapProfile,
    pub params: AnalysisParams,
}

fn uniform(rng: &mut RandomStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

fn int_in(rng: &mut RandomStream, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

/// `k` in `2..=max_k`, `k*` in `1..k`, `n` log-uniform in `[k, 1e6]`,
/// `delta = 1 / (k^2 n)`.
pub fn random_case(rng: &mut RandomStream, max_k: usize) -> Result<FuzzCase> {
    let k = int_in(rng, 2, max_k.max(2));
    let k_star = int_in(rng, 1, k - 1);
    let best = uniform(rng, 0.2, 1.0);
    let mut means = vec![best; k];
    for m in means.iter_mut().skip(k_star) {
        // keep the gap away from zero so delta_min is well defined
        *m = best * uniform(rng, 0.0, 0.98);
    }
    let n_lo = (k as f64).ln();
    let n = uniform(rng, n_lo, 1e6f64.ln()).exp().round().max(k as f64) as u64;
    let instance = BanditInstance::bernoulli(means)?;
    let gaps = gap_profile(&instance)?;
    let params = AnalysisParams::new(n, None, &gaps)?;
    Ok(FuzzCase {
        instance,
        gaps,
        params,
    })
}

/// Sorted-order logits with zero sum inside the good event, found by
/// rejection. Scales are skewed toward small logits with occasional states on
/// the pair-margin boundary.
pub fn random_in_event_logits(
    rng: &mut RandomStream,
    gaps: &GapProfile,
    params: &AnalysisParams,
) -> Vec<f64> {
    let k = gaps.k();
    let ks = gaps.k_star;
    let l = params.log_term;
    loop {
        let scale = l * rng.next_f64().powi(3);
        let mut theta = vec![0.0; k];
        for t in theta.iter_mut().skip(ks) {
            *t = uniform(rng, -scale, scale);
        }
        let best_sub = theta[ks..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let on_boundary = rng.next_f64() < 0.2;
        let spread = uniform(rng, 0.0, 2.0 + scale);
        for t in theta.iter_mut().take(ks) {
            *t = if on_boundary {
                best_sub - 1.0
            } else {
                best_sub - 1.0 + uniform(rng, 0.0, spread)
            };
        }
        let mean = theta.iter().sum::<f64>() / k as f64;
        for t in theta.iter_mut() {
            *t -= mean;
        }
        if g_event(&theta, gaps, params) {
            return theta;
        }
    }
}
