//! Named configurations.

use pg_bandit_core::LearningRateSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two arms, `mu = (0.9, 0.4)`, automatic theorem rate.
    TheoremRegime,
    /// `mu = (1, 1 - gap, 0, ..., 0)` with `eta = C gap^2`, capped at 1/2.
    LowerBoundInstance,
    /// `mu = (1, 1 - gap, ..., 1 - gap)`, `gap >= 1/2`, with `eta` just above
    /// `3 ln 3 / (k - 1)`.
    LargeEtaRemark,
    /// `mu = (1, 1 - gap, ..., 1 - gap)` with `eta = gap / (8k)`.
    EqualGaps,
}

/// Values a preset supplies when the file does not.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PresetDefaults {
    pub means: Option<Vec<f64>>,
    pub n: Option<u64>,
    pub rate: Option<LearningRateSpec>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

/// Learning rates above this are capped by the lower-bound preset.
pub const RATE_CAP: f64 = 0.5;
const DEFAULT_SEED: u64 = 20_240_601;

type FieldError = (&'static str, String);

impl Preset {
    pub const NAMES: &'static [&'static str] = &[
        "theorem-regime",
        "lower-bound-instance",
        "large-eta-remark",
        "equal-gaps",
    ];

    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "theorem-regime" => Some(Preset::TheoremRegime),
            "lower-bound-instance" => Some(Preset::LowerBoundInstance),
            "large-eta-remark" => Some(Preset::LargeEtaRemark),
            "equal-gaps" => Some(Preset::EqualGaps),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::TheoremRegime => "theorem-regime",
            Preset::LowerBoundInstance => "lower-bound-instance",
            Preset::LargeEtaRemark => "large-eta-remark",
            Preset::EqualGaps => "equal-gaps",
        }
    }

    pub fn exploratory(self) -> bool {
        matches!(self, Preset::LowerBoundInstance | Preset::LargeEtaRemark)
    }

    /// Defaults given the optional preset parameters `k`, `gap` and
    /// `eta_multiplier`.
    pub fn defaults(
        self,
        k: Option<usize>,
        gap: Option<f64>,
        multiplier: Option<f64>,
    ) -> Result<PresetDefaults, FieldError> {
        let base = PresetDefaults {
            seed: Some(DEFAULT_SEED),
            ..Default::default()
        };
        let check_k = |k: usize| {
            if k < 2 {
                Err(("k", format!("need at least 2 arms, got {k}")))
            } else {
                Ok(k)
            }
        };
        let check_gap = |g: f64, lo: f64| {
            if g.is_finite() && g >= lo && g <= 1.0 && g > 0.0 {
                Ok(g)
            } else {
                Err(("gap", format!("{g} is outside ({lo}, 1]")))
            }
        };
        match self {
            Preset::TheoremRegime => {
                if k.is_some() || gap.is_some() || multiplier.is_some() {
                    return Err((
                        "preset",
                        "theorem-regime takes no k, gap or eta_multiplier; set means".into(),
                    ));
                }
                Ok(PresetDefaults {
                    means: Some(vec![0.9, 0.4]),
                    n: Some(10_000),
                    rate: Some(LearningRateSpec::TheoremAuto),
                    runs: Some(10_000),
                    ..base
                })
            }
            Preset::LowerBoundInstance => {
                let k = check_k(k.unwrap_or(3))?;
                let gap = check_gap(gap.unwrap_or(0.25), 0.0)?;
                let c = multiplier.unwrap_or(10.0);
                if !(c.is_finite() && c > 0.0) {
                    return Err(("eta_multiplier", format!("{c} is not positive")));
                }
                let mut means = vec![0.0; k];
                means[0] = 1.0;
                means[1] = 1.0 - gap;
                let raw = c * gap * gap;
                let mut notes = Vec::new();
                if raw > RATE_CAP {
                    notes.push(format!("eta C*gap^2 = {raw} capped at {RATE_CAP}"));
                }
                Ok(PresetDefaults {
                    means: Some(means),
                    n: Some(100_000),
                    rate: Some(LearningRateSpec::Constant(raw.min(RATE_CAP))),
                    runs: Some(1000),
                    notes,
                    ..base
                })
            }
            Preset::LargeEtaRemark => {
                let k = check_k(k.unwrap_or(10))?;
                let gap = check_gap(gap.unwrap_or(0.5), 0.5)?;
                let factor = multiplier.unwrap_or(1.01);
                if !(factor.is_finite() && factor > 1.0) {
                    return Err(("eta_multiplier", format!("{factor} must exceed 1")));
                }
                let mut means = vec![1.0 - gap; k];
                means[0] = 1.0;
                let eta = factor * 3.0 * 3f64.ln() / (k - 1) as f64;
                Ok(PresetDefaults {
                    means: Some(means),
                    n: Some(10_000),
                    rate: Some(LearningRateSpec::Constant(eta)),
                    runs: Some(100),
                    notes: vec![format!("eta = {factor} * 3 ln 3 / (k - 1), not capped")],
                    ..base
                })
            }
            Preset::EqualGaps => {
                if multiplier.is_some() {
                    return Err(("eta_multiplier", "equal-gaps fixes eta = gap / (8k)".into()));
                }
                let k = check_k(k.unwrap_or(5))?;
                let gap = check_gap(gap.unwrap_or(0.5), 0.0)?;
                let mut means = vec![1.0 - gap; k];
                means[0] = 1.0;
                Ok(PresetDefaults {
                    means: Some(means),
                    n: Some(10_000),
                    rate: Some(LearningRateSpec::Constant(gap / (8.0 * k as f64))),
                    runs: Some(100),
                    ..base
                })
            }
        }
    }
}
