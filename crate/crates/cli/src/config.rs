//! Experiment configuration files.
//!
//! The grammar is the `key = value` subset of TOML: `#` comments, strings in
//! double quotes, arrays in brackets.
//!
//! ```toml
//! means = [0.9, 0.4]
//! distribution = "bernoulli"   # or "point_mass", "clipped_uniform"
//! n = 10000
//! eta = "theorem_auto"         # or a number; or `schedule = [[1, 1e-4], [5000, 1e-3]]`
//! m = 100
//! seed = 42
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use pg_bandit_core::diagnostics::default_delta;
use pg_bandit_core::engine::default_stride;
use pg_bandit_core::{
    gap_profile, theorem_learning_rate, BanditInstance, Experiment, GapProfile, LearningRateSpec,
    RecordingOptions, RewardDist,
};
use serde::Deserialize;

use crate::presets::Preset;

/// Every key the file grammar accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "preset",
    "means",
    "distribution",
    "half_width",
    "n",
    "eta",
    "schedule",
    "m",
    "seed",
    "delta",
    "stride",
    "out",
    "checkpoints",
    "k",
    "gap",
    "eta_multiplier",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key `{key}`{}", line_suffix(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("invalid `{field}`{}: {message}", line_suffix(*.line))]
    Invalid {
        field: &'static str,
        line: Option<usize>,
        message: String,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("unknown preset `{0}` (expected one of: {names})", names = Preset::NAMES.join(", "))]
    UnknownPreset(String),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

/// The learning rate as written in a file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RawEta {
    Value(f64),
    Named(String),
}

/// Unvalidated keys. Command-line flags are merged into this before
/// [`RawConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub means: Option<Vec<f64>>,
    pub distribution: Option<String>,
    pub half_width: Option<f64>,
    pub n: Option<u64>,
    pub eta: Option<RawEta>,
    pub schedule: Option<Vec<(u64, f64)>>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub stride: Option<usize>,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<Vec<u64>>,
    pub k: Option<usize>,
    pub gap: Option<f64>,
    pub eta_multiplier: Option<f64>,
}

/// How a configuration relates to the regret guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Constant rate at or below the theorem threshold.
    Theorem,
    /// Above the threshold, or a schedule.
    NonTheorem,
    /// Presets probing regimes the guarantee does not cover.
    Exploratory,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Theorem => "theorem",
            Regime::NonTheorem => "non-theorem",
            Regime::Exploratory => "EXPLORATORY",
        })
    }
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<Preset>,
    pub instance: BanditInstance,
    pub n: u64,
    pub rate: LearningRateSpec,
    pub runs: usize,
    pub seed: u64,
    pub delta: f64,
    pub stride: usize,
    pub out: PathBuf,
    pub checkpoints: Vec<u64>,
    pub regime: Regime,
    /// Remarks echoed into output metadata, e.g. a capped rate.
    pub notes: Vec<String>,
}

impl ExperimentConfig {
    pub fn k(&self) -> usize {
        self.instance.k()
    }

    pub fn gaps(&self) -> GapProfile {
        gap_profile(&self.instance).expect("validated instance")
    }

    pub fn recording(&self) -> RecordingOptions {
        RecordingOptions {
            snapshots: true,
            stride: Some(self.stride),
            delta: Some(self.delta),
            checkpoints: Some(self.checkpoints.clone()),
        }
    }

    pub fn experiment(&self) -> pg_bandit_core::Result<Experiment> {
        Experiment::new(
            self.instance.clone(),
            self.rate.clone(),
            self.n,
            self.recording(),
        )
    }

    /// Learning rate used in bound shapes: the largest rate a run can use.
    pub fn bound_rate(&self) -> f64 {
        self.rate
            .max_rate(Some(&self.gaps()), Some(self.n))
            .expect("validated rate")
    }

    /// Key/value pairs echoed at the top of every output file.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = vec![
            (
                "preset".into(),
                self.preset.map_or("none".into(), |p| p.name().to_string()),
            ),
            ("means".into(), list(self.instance.means())),
            ("distribution".into(), distribution_label(&self.instance)),
            ("n".into(), self.n.to_string()),
            ("eta".into(), self.rate.describe()),
            ("m".into(), self.runs.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("delta".into(), crate::output::num(self.delta)),
            ("stride".into(), self.stride.to_string()),
            (
                "checkpoints".into(),
                self.checkpoints
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            ("regime".into(), self.regime.to_string()),
        ];
        for note in &self.notes {
            out.push(("note".into(), note.clone()));
        }
        out
    }
}

fn distribution_label(instance: &BanditInstance) -> String {
    match instance.dists()[0] {
        RewardDist::ClippedUniform { half_width } => {
            format!("clipped_uniform(half_width={half_width})")
        }
        d => d.name().to_string(),
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    parse_config_str(&read_text(path.as_ref())?)
}

/// Reads a configuration file without validating values.
pub fn read_raw(path: impl AsRef<Path>) -> Result<RawConfig, ConfigError> {
    parse_raw(&read_text(path.as_ref())?)
}

fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_raw(text)?.resolve_with_source(Some(text))
}

/// Parses configuration text into unvalidated keys.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_at(text, s.start)),
        message: e.message().to_string(),
    })?;
    if let Some(key) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey {
            key: key.clone(),
            line: key_line(text, key),
        });
    }
    let mut raw = RawConfig::default();
    for (key, value) in table {
        raw.set(&key, value)
            .map_err(|message| ConfigError::Invalid {
                field: known_key(&key),
                line: key_line(text, &key),
                message,
            })?;
    }
    Ok(raw)
}

fn known_key(key: &str) -> &'static str {
    KNOWN_KEYS
        .iter()
        .find(|k| **k == key)
        .copied()
        .unwrap_or("?")
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

impl RawConfig {
    /// Deserializes one key so type errors can name the field.
    fn set(&mut self, key: &str, value: toml::Value) -> Result<(), String> {
        fn conv<T: serde::de::DeserializeOwned>(v: toml::Value) -> Result<Option<T>, String> {
            v.try_into()
                .map(Some)
                .map_err(|e: toml::de::Error| e.message().to_string())
        }
        match key {
            "preset" => self.preset = conv(value)?,
            "means" => self.means = conv(value)?,
            "distribution" => self.distribution = conv(value)?,
            "half_width" => self.half_width = conv(value)?,
            "n" => self.n = conv(value)?,
            "eta" => self.eta = conv(value)?,
            "schedule" => self.schedule = conv(value)?,
            "m" => self.m = conv(value)?,
            "seed" => self.seed = conv(value)?,
            "delta" => self.delta = conv(value)?,
            "stride" => self.stride = conv(value)?,
            "out" => self.out = conv(value)?,
            "checkpoints" => self.checkpoints = conv(value)?,
            "k" => self.k = conv(value)?,
            "gap" => self.gap = conv(value)?,
            "eta_multiplier" => self.eta_multiplier = conv(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: RawConfig) -> RawConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            preset,
            means,
            distribution,
            half_width,
            n,
            eta,
            schedule,
            m,
            seed,
            delta,
            stride,
            out,
            checkpoints,
            k,
            gap,
            eta_multiplier
        );
        self
    }

    /// Validates and fills defaults.
    pub fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        self.resolve_with_source(None)
    }

    fn resolve_with_source(self, source: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
        let line = |field: &str| source.and_then(|t| key_line(t, field));
        let invalid = |field: &'static str, message: String| ConfigError::Invalid {
            field,
            line: line(field),
            message,
        };

        let preset = match &self.preset {
            Some(name) => Some(
                Preset::from_name(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?,
            ),
            None => None,
        };
        let defaults = match preset {
            Some(p) => p
                .defaults(self.k, self.gap, self.eta_multiplier)
                .map_err(|(f, m)| invalid(f, m))?,
            None => {
                let extras = [
                    ("k", self.k.is_some()),
                    ("gap", self.gap.is_some()),
                    ("eta_multiplier", self.eta_multiplier.is_some()),
                ];
                if let Some((field, _)) = extras.iter().find(|(_, set)| *set) {
                    return Err(invalid(
                        field,
                        "only meaningful together with a preset".into(),
                    ));
                }
                Default::default()
            }
        };

        let means = self
            .means
            .or(defaults.means)
            .ok_or(ConfigError::Missing("means"))?;
        let dist = match self.distribution.as_deref().unwrap_or("bernoulli") {
            "bernoulli" => {
                if self.half_width.is_some() {
                    return Err(invalid("half_width", "only used by clipped_uniform".into()));
                }
                RewardDist::Bernoulli
            }
            "point_mass" => {
                if self.half_width.is_some() {
                    return Err(invalid("half_width", "only used by clipped_uniform".into()));
                }
                RewardDist::PointMass
            }
            "clipped_uniform" => RewardDist::ClippedUniform {
                half_width: self.half_width.ok_or(ConfigError::Missing("half_width"))?,
            },
            other => {
                return Err(invalid(
                    "distribution",
                    format!("`{other}` is not one of bernoulli, point_mass, clipped_uniform"),
                ))
            }
        };
        let instance = BanditInstance::with_family(means, dist)
            .map_err(|e| invalid("means", e.to_string()))?;
        let gaps = gap_profile(&instance).map_err(|e| invalid("means", e.to_string()))?;
        let k = instance.k();

        let n = self.n.or(defaults.n).ok_or(ConfigError::Missing("n"))?;
        if (n as usize) < k {
            return Err(invalid(
                "n",
                format!("horizon {n} is shorter than the arm count {k}"),
            ));
        }

        let mut notes = defaults.notes;
        let rate = match (self.eta, self.schedule) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "schedule",
                    "give either `eta` or `schedule`, not both".into(),
                ))
            }
            (None, Some(steps)) => LearningRateSpec::Schedule(steps),
            (Some(RawEta::Value(v)), None) => LearningRateSpec::Constant(v),
            (Some(RawEta::Named(s)), None) if s == "theorem_auto" => LearningRateSpec::TheoremAuto,
            (Some(RawEta::Named(s)), None) => {
                return Err(invalid(
                    "eta",
                    format!("expected a number or \"theorem_auto\", got \"{s}\""),
                ))
            }
            (None, None) => defaults.rate.ok_or(ConfigError::Missing("eta"))?,
        };
        let field = if matches!(rate, LearningRateSpec::Schedule(_)) {
            "schedule"
        } else {
            "eta"
        };
        rate.validate().map_err(|e| invalid(field, e.to_string()))?;
        let max_rate = rate
            .max_rate(Some(&gaps), Some(n))
            .map_err(|e| invalid(field, e.to_string()))?;
        if max_rate > 0.5 {
            notes.push(format!(
                "eta {max_rate} exceeds 1/2; increment bounds of the analysis do not apply"
            ));
        }

        let runs = self.m.or(defaults.runs).ok_or(ConfigError::Missing("m"))?;
        if runs == 0 {
            return Err(invalid("m", "need at least one run".into()));
        }
        let seed = self
            .seed
            .or(defaults.seed)
            .ok_or(ConfigError::Missing("seed"))?;

        let delta = self.delta.unwrap_or_else(|| default_delta(k, n));
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta", format!("{delta} is outside (0, 1)")));
        }
        let stride = self.stride.unwrap_or_else(|| default_stride(n));
        if stride == 0 {
            return Err(invalid("stride", "must be at least 1".into()));
        }
        let checkpoints = match self.checkpoints {
            Some(c) => {
                if let Some(bad) = c.iter().find(|&&t| t == 0 || t > n) {
                    return Err(invalid("checkpoints", format!("{bad} is outside 1..={n}")));
                }
                let mut c = c;
                c.sort_unstable();
                c.dedup();
                c
            }
            None => RecordingOptions::default().checkpoints_for(n),
        };

        let theorem =
            theorem_learning_rate(&gaps, n, k).map_err(|e| invalid("n", e.to_string()))?;
        let regime = if preset.is_some_and(|p| p.exploratory()) {
            Regime::Exploratory
        } else if matches!(rate, LearningRateSpec::Schedule(_)) || max_rate > theorem {
            Regime::NonTheorem
        } else {
            Regime::Theorem
        };

        Ok(ExperimentConfig {
            preset,
            instance,
            n,
            rate,
            runs,
            seed,
            delta,
            stride,
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            checkpoints,
            regime,
            notes,
        })
    }
}
