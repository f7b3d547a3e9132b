//! Run configuration: search hyperparameters, sampling parameters and seed.
//!
//! Config files are TOML documents whose keys mirror [`RunConfig`] field names.
//! Unknown keys are rejected. Missing keys take the documented defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_BRANCH_COUNT: u32 = 64;
pub const DEFAULT_CHUNK_TOKENS: u64 = 2048;
pub const DEFAULT_MAX_TOKENS: u64 = 38_000;
pub const DEFAULT_BROADCAST_SIZE: usize = 512;
pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.75;
pub const DEFAULT_WINDOW_SIZE: usize = 3;
pub const DEFAULT_START_THRESHOLD: f64 = 0.4;
pub const DEFAULT_STOP_THRESHOLD: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-9;
pub const DEFAULT_EXTRACTION_TOKENS: u64 = 1024;
pub const DEFAULT_HISTORY_NOTES: usize = 64;
pub const DEFAULT_TEMPERATURE: f64 = 0.6;
pub const DEFAULT_TOP_P: f64 = 0.95;
pub const DEFAULT_TOP_K: u32 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("branch count must be positive")]
    ZeroBranches,
    #[error("chunk exceeds max length ({chunk} > {max})")]
    ChunkExceedsMax { chunk: u64, max: u64 },
    #[error("stop threshold must be below start threshold ({stop} >= {start})")]
    ThresholdOrder { start: f64, stop: f64 },
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: String },
    #[error("unknown override key `{0}`")]
    UnknownKey(String),
    #[error("malformed override `{0}`, expected key=value")]
    MalformedOverride(String),
    #[error("invalid value `{value}` for {key}")]
    InvalidValue { key: String, value: String },
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("failed to read config {path}: {message}")]
    Io { path: String, message: String },
}

/// Top-k truncation: a positive count or no truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopK {
    Limited(u32),
    Unlimited,
}

impl TopK {
    pub fn as_option(self) -> Option<u32> {
        match self {
            TopK::Limited(k) => Some(k),
            TopK::Unlimited => None,
        }
    }
}

impl Serialize for TopK {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TopK::Limited(k) => s.serialize_u32(*k),
            TopK::Unlimited => s.serialize_str("unlimited"),
        }
    }
}

impl<'de> Deserialize<'de> for TopK {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct TopKVisitor;
        impl Visitor<'_> for TopKVisitor {
            type Value = TopK;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"unlimited\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<TopK, E> {
                u32::try_from(v)
                    .map(TopK::Limited)
                    .map_err(|_| E::custom(format!("top_k out of range: {v}")))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<TopK, E> {
                u32::try_from(v)
                    .map(TopK::Limited)
                    .map_err(|_| E::custom(format!("top_k out of range: {v}")))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<TopK, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(TopKVisitor)
    }
}

impl FromStr for TopK {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unlimited") || s.eq_ignore_ascii_case("none") {
            return Ok(TopK::Unlimited);
        }
        s.parse::<u32>()
            .map(TopK::Limited)
            .map_err(|_| format!("expected a positive integer or \"unlimited\", got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: TopK,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            top_k: TopK::Limited(DEFAULT_TOP_K),
        }
    }
}

/// Validated run configuration. Construct through [`RunConfig::validate`] or
/// the file / string loaders; the fields are public for reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of parallel branches (K).
    pub branch_count: u32,
    /// Tokens generated per synchronized search step (C).
    pub chunk_tokens: u64,
    /// Per-branch generation cap (L_max).
    pub max_tokens: u64,
    /// Maximum pool entries per broadcast (M).
    pub broadcast_size: usize,
    /// Cosine threshold at or above which a candidate note is a duplicate.
    pub dedup_threshold: f64,
    /// Search steps per scheduling window (W).
    pub window_size: usize,
    pub start_threshold: f64,
    pub stop_threshold: f64,
    pub epsilon: f64,
    /// Completion budget for each note-extraction request.
    pub extraction_tokens: u64,
    /// Most recent pool entries shown to the extractor as already-known notes.
    pub history_notes: usize,
    pub seed: u64,
    pub sampling: SamplingParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RawRunConfig::default()
            .validate()
            .expect("defaults are valid")
    }
}

/// Partially specified configuration as read from a file or assembled from
/// overrides. Every field is optional; [`RawRunConfig::validate`] fills defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRunConfig {
    pub branch_count: Option<u32>,
    pub chunk_tokens: Option<u64>,
    pub max_tokens: Option<u64>,
    pub broadcast_size: Option<usize>,
    pub dedup_threshold: Option<f64>,
    pub window_size: Option<usize>,
    pub start_threshold: Option<f64>,
    pub stop_threshold: Option<f64>,
    pub epsilon: Option<f64>,
    pub extraction_tokens: Option<u64>,
    pub history_notes: Option<usize>,
    pub seed: Option<u64>,
    pub sampling: Option<RawSampling>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampling {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub top_k: Option<TopK>,
}

fn check(cond: bool, field: &'static str, value: impl fmt::Display) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            value: value.to_string(),
        })
    }
}

impl RawRunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Apply defaults and check every invariant.
    pub fn validate(self) -> Result<RunConfig, ConfigError> {
        let sampling_raw = self.sampling.unwrap_or_default();
        let sampling = SamplingParams {
            temperature: sampling_raw.temperature.unwrap_or(DEFAULT_TEMPERATURE),
            top_p: sampling_raw.top_p.unwrap_or(DEFAULT_TOP_P),
            top_k: sampling_raw.top_k.unwrap_or(TopK::Limited(DEFAULT_TOP_K)),
        };
        let cfg = RunConfig {
            branch_count: self.branch_count.unwrap_or(DEFAULT_BRANCH_COUNT),
            chunk_tokens: self.chunk_tokens.unwrap_or(DEFAULT_CHUNK_TOKENS),
            max_tokens: self.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
            broadcast_size: self.broadcast_size.unwrap_or(DEFAULT_BROADCAST_SIZE),
            dedup_threshold: self.dedup_threshold.unwrap_or(DEFAULT_DEDUP_THRESHOLD),
            window_size: self.window_size.unwrap_or(DEFAULT_WINDOW_SIZE),
            start_threshold: self.start_threshold.unwrap_or(DEFAULT_START_THRESHOLD),
            stop_threshold: self.stop_threshold.unwrap_or(DEFAULT_STOP_THRESHOLD),
            epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
            extraction_tokens: self.extraction_tokens.unwrap_or(DEFAULT_EXTRACTION_TOKENS),
            history_notes: self.history_notes.unwrap_or(DEFAULT_HISTORY_NOTES),
            seed: self.seed.unwrap_or(0),
            sampling,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Apply one `key=value` override. Keys accept the field names as well as
    /// the short symbols (`K`, `C`, `L_max`, `M`, `tau_dup`, `W`, ...).
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::MalformedOverride(spec.to_string()))?;
        let key = key.trim();
        let value = value.trim();
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        let sampling = || RawSampling::default();
        match key {
            "K" | "branch_count" => self.branch_count = Some(parse(key, value)?),
            "C" | "chunk_tokens" => self.chunk_tokens = Some(parse(key, value)?),
            "L_max" | "max_tokens" => self.max_tokens = Some(parse(key, value)?),
            "M" | "broadcast_size" => self.broadcast_size = Some(parse(key, value)?),
            "tau_dup" | "dedup_threshold" => self.dedup_threshold = Some(parse(key, value)?),
            "W" | "window_size" => self.window_size = Some(parse(key, value)?),
            "tau_start" | "start_threshold" => self.start_threshold = Some(parse(key, value)?),
            "tau_stop" | "stop_threshold" => self.stop_threshold = Some(parse(key, value)?),
            "eps" | "epsilon" => self.epsilon = Some(parse(key, value)?),
            "extraction_tokens" => self.extraction_tokens = Some(parse(key, value)?),
            "history_notes" => self.history_notes = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "T" | "temperature" | "sampling.temperature" => {
                self.sampling.get_or_insert_with(sampling).temperature = Some(parse(key, value)?)
            }
            "top_p" | "sampling.top_p" => {
                self.sampling.get_or_insert_with(sampling).top_p = Some(parse(key, value)?)
            }
            "top_k" | "sampling.top_k" => {
                let k: TopK = value.parse().map_err(|_| ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: value.to_string(),
                })?;
                self.sampling.get_or_insert_with(sampling).top_k = Some(k)
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}

impl From<&RunConfig> for RawRunConfig {
    fn from(c: &RunConfig) -> Self {
        RawRunConfig {
            branch_count: Some(c.branch_count),
            chunk_tokens: Some(c.chunk_tokens),
            max_tokens: Some(c.max_tokens),
            broadcast_size: Some(c.broadcast_size),
            dedup_threshold: Some(c.dedup_threshold),
            window_size: Some(c.window_size),
            start_threshold: Some(c.start_threshold),
            stop_threshold: Some(c.stop_threshold),
            epsilon: Some(c.epsilon),
            extraction_tokens: Some(c.extraction_tokens),
            history_notes: Some(c.history_notes),
            seed: Some(c.seed),
            sampling: Some(RawSampling {
                temperature: Some(c.sampling.temperature),
                top_p: Some(c.sampling.top_p),
                top_k: Some(c.sampling.top_k),
            }),
        }
    }
}

impl RunConfig {
    /// Check every invariant of an already-built config.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.branch_count == 0 {
            return Err(ConfigError::ZeroBranches);
        }
        check(self.chunk_tokens >= 1, "chunk_tokens", self.chunk_tokens)?;
        check(self.max_tokens >= 1, "max_tokens", self.max_tokens)?;
        if self.chunk_tokens > self.max_tokens {
            return Err(ConfigError::ChunkExceedsMax {
                chunk: self.chunk_tokens,
                max: self.max_tokens,
            });
        }
        check(self.broadcast_size >= 1, "broadcast_size", self.broadcast_size)?;
        check(self.window_size >= 1, "window_size", self.window_size)?;
        check(
            (0.0..=1.0).contains(&self.dedup_threshold),
            "dedup_threshold",
            self.dedup_threshold,
        )?;
        check(
            self.start_threshold > 0.0 && self.start_threshold <= 1.0,
            "start_threshold",
            self.start_threshold,
        )?;
        check(
            self.stop_threshold >= 0.0 && self.stop_threshold < 1.0,
            "stop_threshold",
            self.stop_threshold,
        )?;
        if self.stop_threshold >= self.start_threshold {
            return Err(ConfigError::ThresholdOrder {
                start: self.start_threshold,
                stop: self.stop_threshold,
            });
        }
        check(
            self.epsilon > 0.0 && self.epsilon.is_finite(),
            "epsilon",
            self.epsilon,
        )?;
        check(
            self.extraction_tokens >= 1,
            "extraction_tokens",
            self.extraction_tokens,
        )?;
        let s = &self.sampling;
        check(
            s.temperature >= 0.0 && s.temperature.is_finite(),
            "sampling.temperature",
            s.temperature,
        )?;
        check(s.top_p > 0.0 && s.top_p <= 1.0, "sampling.top_p", s.top_p)?;
        if let TopK::Limited(k) = s.top_k {
            check(k >= 1, "sampling.top_k", k)?;
        }
        Ok(())
    }

    /// Re-check a config that was built or edited in code.
    pub fn validate(raw: RawRunConfig) -> Result<RunConfig, ConfigError> {
        raw.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig, ConfigError> {
        RawRunConfig::from_toml_str(text)?.validate()
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        Self::load_with_overrides(path, &[])
    }

    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut raw = RawRunConfig::from_toml_str(&text)?;
        for o in overrides {
            raw.apply_override(o)?;
        }
        raw.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes to TOML")
    }

    /// Steps needed for a branch to reach `max_tokens` when every chunk is full.
    pub fn max_steps(&self) -> u64 {
        self.max_tokens.div_ceil(self.chunk_tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(k: u32, c: u64, l: u64) -> RawRunConfig {
        RawRunConfig {
            branch_count: Some(k),
            chunk_tokens: Some(c),
            max_tokens: Some(l),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_applied() {
        let cfg = raw(64, 2048, 38_000).validate().unwrap();
        assert_eq!(cfg.broadcast_size, 512);
        assert_eq!(cfg.dedup_threshold, 0.75);
        assert_eq!(cfg.window_size, 3);
        assert_eq!(cfg.start_threshold, 0.4);
        assert_eq!(cfg.stop_threshold, 0.1);
        assert_eq!(cfg.epsilon, 1e-9);
        assert_eq!(cfg.sampling.temperature, 0.6);
        assert_eq!(cfg.sampling.top_p, 0.95);
        assert_eq!(cfg.sampling.top_k, TopK::Limited(20));
        assert_eq!(RunConfig::default().max_tokens, 38_000);
        assert_eq!(RunConfig::default().chunk_tokens, 2048);
    }

    #[test]
    fn rejects_inverted_thresholds() {
        let mut r = raw(4, 16, 64);
        r.start_threshold = Some(0.2);
        r.stop_threshold = Some(0.3);
        let err = r.validate().unwrap_err();
        assert!(matches!(err, ConfigError::ThresholdOrder { .. }));
        assert!(err
            .to_string()
            .starts_with("stop threshold must be below start threshold"));
    }

    #[test]
    fn rejects_equal_thresholds() {
        let mut r = raw(4, 16, 64);
        r.start_threshold = Some(0.3);
        r.stop_threshold = Some(0.3);
        assert!(matches!(
            r.validate(),
            Err(ConfigError::ThresholdOrder { .. })
        ));
    }

    #[test]
    fn rejects_chunk_larger_than_cap() {
        let err = raw(8, 16, 8).validate().unwrap_err();
        assert_eq!(err, ConfigError::ChunkExceedsMax { chunk: 16, max: 8 });
        assert!(err.to_string().starts_with("chunk exceeds max length"));
    }

    #[test]
    fn rejects_zero_branches() {
        assert_eq!(raw(0, 16, 64).validate(), Err(ConfigError::ZeroBranches));
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let mut r = raw(4, 16, 64);
        r.epsilon = Some(0.0);
        assert!(r.validate().is_err());
        let mut r = raw(4, 16, 64);
        r.dedup_threshold = Some(1.5);
        assert!(r.validate().is_err());
        let mut r = raw(4, 16, 64);
        r.sampling = Some(RawSampling {
            top_p: Some(0.0),
            ..Default::default()
        });
        assert!(r.validate().is_err());
        let mut r = raw(4, 16, 64);
        r.window_size = Some(0);
        assert!(r.validate().is_err());
        let mut r = raw(4, 16, 64);
        r.start_threshold = Some(f64::NAN);
        assert!(r.validate().is_err());
    }

    #[test]
    fn stop_threshold_zero_is_allowed() {
        let mut r = raw(4, 16, 64);
        r.stop_threshold = Some(0.0);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("branch_count = 4\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        let err = RunConfig::from_toml_str("[sampling]\ntemp = 0.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn top_k_accepts_unlimited() {
        let cfg = RunConfig::from_toml_str("[sampling]\ntop_k = \"unlimited\"\n").unwrap();
        assert_eq!(cfg.sampling.top_k, TopK::Unlimited);
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn overrides_use_symbols_and_names() {
        let mut r = RawRunConfig::default();
        r.apply_override("K=8").unwrap();
        r.apply_override("tau_start = 1.0").unwrap();
        r.apply_override("sampling.top_k=unlimited").unwrap();
        r.apply_override("C=256").unwrap();
        let cfg = r.validate().unwrap();
        assert_eq!(cfg.branch_count, 8);
        assert_eq!(cfg.start_threshold, 1.0);
        assert_eq!(cfg.chunk_tokens, 256);
        assert_eq!(cfg.sampling.top_k, TopK::Unlimited);
        let mut r = RawRunConfig::default();
        assert!(matches!(
            r.apply_override("nope=1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            r.apply_override("K"),
            Err(ConfigError::MalformedOverride(_))
        ));
        assert!(matches!(
            r.apply_override("K=x"),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn max_steps_rounds_up() {
        let cfg = raw(1, 2048, 38_000).validate().unwrap();
        assert_eq!(cfg.max_steps(), 19);
    }
}
