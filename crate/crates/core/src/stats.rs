//! Small statistics helpers: moments, quantiles and Wilson intervals.

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Describe {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for a single value).
    pub std: f64,
    pub median: f64,
    pub p95: f64,
}

pub fn describe(values: &[f64]) -> Describe {
    let n = values.len();
    if n == 0 {
        return Describe {
            mean: f64::NAN,
            std: f64::NAN,
            median: f64::NAN,
            p95: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Describe {
        mean,
        std,
        median: quantile_sorted(&sorted, 0.5),
        p95: quantile_sorted(&sorted, 0.95),
    }
}

/// Linear interpolation between order statistics (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_zero_successes() {
        let (lo, hi) = wilson_interval(0, 10_000, Z_95);
        assert_eq!(lo, 0.0);
        // z^2 / (m + z^2), 40-digit evaluation
        assert!((hi - 3.839_983_706_765_957e-4).abs() < 1e-15);
    }

    #[test]
    fn wilson_all_successes() {
        let (lo, hi) = wilson_interval(50, 50, Z_95);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.9 && lo < 1.0);
    }

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(1, 10), (37, 100), (500, 1000), (3, 100_000)] {
            let (lo, hi) = wilson_interval(s, n, Z_95);
            let p = s as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn describe_basic() {
        let d = describe(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.mean, 2.5);
        assert!((d.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(d.median, 2.5);
        assert!((d.p95 - 3.85).abs() < 1e-12);
        let one = describe(&[7.0]);
        assert_eq!(
            (one.mean, one.std, one.median, one.p95),
            (7.0, 0.0, 7.0, 7.0)
        );
    }
}
