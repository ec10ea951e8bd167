//! Scenario configuration.
//!
//! Scenarios are flat `key = value` files (TOML syntax) whose keys are the
//! usual streaming symbols, plus a `[strategy]` section for the
//! recombination policy:
//!
//! ```toml
//! N = 200            # peers
//! N_m = 4            # malicious peers
//! N_s = 15           # max neighbourhood size
//! k = 50             # generation size
//! block_size = 128   # simulated payload bytes per block
//! B_v = 500000       # video bitrate, bit/s
//! C_t = 1.0          # generation playout duration, s
//! t_b = 10.0         # buffering time, s
//! B_s = 20000000     # server upload, bit/s
//! B_p = 750000       # peer upload, bit/s
//! p_poll = 0.01
//! attack_start = 20.0
//! attack_end = 40.0
//! duration = 60.0    # streamed video, s
//! seed = 1
//! detector = "OFG"   # OFG | Checksum | None
//! neighbor_refresh_period = 0.0
//!
//! [strategy]
//! kind = "AgeBased"  # Reference | AgeBased
//! alpha = 1.0
//! m_r = 2
//! orientation = "AgeRank"
//! ```

use crate::recombiner::{Orientation, StrategyConfig, StrategyKind};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const TICKS_PER_SECOND: u64 = 1_000_000;
/// Widest decoding region a decoding map can describe.
pub const MAX_REGION: u64 = 64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("bad value `{value}` for `{param}`: {reason}")]
    BadValue {
        param: String,
        value: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    #[serde(rename = "OFG")]
    Ofg,
    Checksum,
    None,
}

impl Detector {
    pub fn label(&self) -> &'static str {
        match self {
            Detector::Ofg => "OFG",
            Detector::Checksum => "Checksum",
            Detector::None => "None",
        }
    }
}

impl std::str::FromStr for Detector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OFG" | "ofg" => Ok(Detector::Ofg),
            "Checksum" | "checksum" => Ok(Detector::Checksum),
            "None" | "none" => Ok(Detector::None),
            other => Err(format!("unknown detector `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "N")]
    pub nodes: usize,
    #[serde(rename = "N_m")]
    pub malicious: usize,
    #[serde(rename = "N_s")]
    pub max_neighbors: usize,
    pub k: usize,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    #[serde(rename = "B_v")]
    pub video_bitrate: u64,
    #[serde(rename = "C_t")]
    pub generation_duration: f64,
    #[serde(rename = "t_b")]
    pub buffering_time: f64,
    #[serde(rename = "B_s")]
    pub server_bandwidth: u64,
    #[serde(rename = "B_p")]
    pub peer_bandwidth: u64,
    pub p_poll: f64,
    pub attack_start: f64,
    pub attack_end: f64,
    pub duration: f64,
    pub seed: u64,
    pub detector: Detector,
    #[serde(default)]
    pub neighbor_refresh_period: f64,
    pub strategy: StrategyConfig,
}

fn default_block_size() -> usize {
    128
}

impl ScenarioConfig {
    /// The full-scale experiment: 1000 peers, 20 malicious, 300 s of video.
    pub fn full_scale() -> Self {
        ScenarioConfig {
            nodes: 1000,
            malicious: 20,
            max_neighbors: 25,
            k: 50,
            block_size: 128,
            video_bitrate: 500_000,
            generation_duration: 1.0,
            buffering_time: 10.0,
            server_bandwidth: 20_000_000,
            peer_bandwidth: 750_000,
            p_poll: 0.01,
            attack_start: 90.0,
            attack_end: 210.0,
            duration: 300.0,
            seed: 1,
            detector: Detector::Ofg,
            neighbor_refresh_period: 0.0,
            strategy: StrategyConfig::reference(),
        }
    }

    /// Desk-scale variant: 200 peers, 4 malicious, 60 s with the attack in
    /// the middle third. Rates and timing stay at their full-scale values.
    pub fn desk_small() -> Self {
        ScenarioConfig {
            nodes: 200,
            malicious: 4,
            max_neighbors: 15,
            attack_start: 20.0,
            attack_end: 40.0,
            duration: 60.0,
            ..Self::full_scale()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(format_toml_error(text, &e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.nodes < 2 {
            return bad(format!("N must be at least 2, got {}", self.nodes));
        }
        if self.malicious > self.nodes {
            return bad(format!("N_m={} exceeds N={}", self.malicious, self.nodes));
        }
        if self.malicious == self.nodes {
            return bad("at least one honest peer is required".into());
        }
        if self.max_neighbors < 1 {
            return bad("N_s must be at least 1".into());
        }
        if self.max_neighbors == 1 && self.nodes > 2 {
            return bad("N_s=1 cannot form a connected overlay".into());
        }
        if self.k < 1 || self.block_size < 1 {
            return bad("k and block_size must be at least 1".into());
        }
        if self.video_bitrate == 0 || self.server_bandwidth == 0 || self.peer_bandwidth == 0 {
            return bad("B_v, B_s and B_p must be positive".into());
        }
        for (name, v) in [
            ("C_t", self.generation_duration),
            ("t_b", self.buffering_time),
            ("duration", self.duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.generation_ticks() == 0 {
            return bad("C_t is below the 1 microsecond tick".into());
        }
        if self.buffering_time < self.generation_duration {
            return bad("t_b must cover at least one generation".into());
        }
        if self.region_len() > MAX_REGION {
            return bad(format!(
                "t_b/C_t = {} exceeds the supported decoding region of {MAX_REGION}",
                self.region_len()
            ));
        }
        if self.generations() == 0 {
            return bad("duration shorter than one generation".into());
        }
        if !(0.0 <= self.attack_start
            && self.attack_start <= self.attack_end
            && self.attack_end <= self.duration)
        {
            return bad("need 0 <= attack_start <= attack_end <= duration".into());
        }
        if !(0.0..=1.0).contains(&self.p_poll) {
            return bad(format!("p_poll must lie in [0, 1], got {}", self.p_poll));
        }
        if !(self.neighbor_refresh_period >= 0.0 && self.neighbor_refresh_period.is_finite()) {
            return bad("neighbor_refresh_period must be >= 0".into());
        }
        if self.peer_interval_ticks() < 1.0 || self.server_interval_ticks() < 1.0 {
            return bad("bandwidth too high for the 1 microsecond tick".into());
        }
        self.strategy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn honest(&self) -> usize {
        self.nodes - self.malicious
    }

    pub fn generation_ticks(&self) -> u64 {
        seconds_to_ticks(self.generation_duration)
    }

    pub fn buffering_ticks(&self) -> u64 {
        seconds_to_ticks(self.buffering_time)
    }

    /// Number of generations streamed.
    pub fn generations(&self) -> u64 {
        seconds_to_ticks(self.duration) / self.generation_ticks()
    }

    /// Generations in a full decoding region, `t_b / C_t`.
    pub fn region_len(&self) -> u64 {
        self.buffering_ticks().div_ceil(self.generation_ticks())
    }

    /// Nominal coded packet size in bits: one generation of video split in `k`.
    pub fn packet_bits(&self) -> f64 {
        self.video_bitrate as f64 * self.generation_duration / self.k as f64
    }

    pub fn peer_interval_ticks(&self) -> f64 {
        self.packet_bits() * TICKS_PER_SECOND as f64 / self.peer_bandwidth as f64
    }

    pub fn server_interval_ticks(&self) -> f64 {
        self.packet_bits() * TICKS_PER_SECOND as f64 / self.server_bandwidth as f64
    }

    /// Overrides one parameter by name. Accepts the file keys and the
    /// strategy fields (`alpha`, `m_r`, `strategy`, `orientation`).
    pub fn set_param(&mut self, name: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value
                .trim()
                .parse::<T>()
                .map_err(|e| ConfigError::BadValue {
                    param: name.to_string(),
                    value: value.to_string(),
                    reason: e.to_string(),
                })
        }
        match name {
            "N" => self.nodes = parse(name, value)?,
            "N_m" => self.malicious = parse(name, value)?,
            "N_s" => self.max_neighbors = parse(name, value)?,
            "k" => self.k = parse(name, value)?,
            "block_size" => self.block_size = parse(name, value)?,
            "B_v" => self.video_bitrate = parse(name, value)?,
            "C_t" => self.generation_duration = parse(name, value)?,
            "t_b" => self.buffering_time = parse(name, value)?,
            "B_s" => self.server_bandwidth = parse(name, value)?,
            "B_p" => self.peer_bandwidth = parse(name, value)?,
            "p_poll" => self.p_poll = parse(name, value)?,
            "attack_start" => self.attack_start = parse(name, value)?,
            "attack_end" => self.attack_end = parse(name, value)?,
            "duration" => self.duration = parse(name, value)?,
            "seed" => self.seed = parse(name, value)?,
            "detector" => self.detector = parse(name, value)?,
            "neighbor_refresh_period" => self.neighbor_refresh_period = parse(name, value)?,
            "alpha" => self.strategy.alpha = parse(name, value)?,
            "m_r" => self.strategy.m_r = parse(name, value)?,
            "p_uniform" => self.strategy.p_uniform = parse(name, value)?,
            "strategy" => {
                self.strategy.kind = match value.trim() {
                    "Reference" | "reference" => StrategyKind::Reference,
                    "AgeBased" | "age_based" | "Proposed" => StrategyKind::AgeBased,
                    other => {
                        return Err(ConfigError::BadValue {
                            param: name.into(),
                            value: other.into(),
                            reason: "expected Reference or AgeBased".into(),
                        })
                    }
                }
            }
            "orientation" => {
                self.strategy.orientation = match value.trim() {
                    "Literal" => Orientation::Literal,
                    "Complement" => Orientation::Complement,
                    "AgeRank" => Orientation::AgeRank,
                    other => {
                        return Err(ConfigError::BadValue {
                            param: name.into(),
                            value: other.into(),
                            reason: "expected Literal, Complement or AgeRank".into(),
                        })
                    }
                }
            }
            other => return Err(ConfigError::UnknownParam(other.to_string())),
        }
        Ok(())
    }
}

pub fn seconds_to_ticks(s: f64) -> u64 {
    (s * TICKS_PER_SECOND as f64).round() as u64
}

fn format_toml_error(text: &str, err: &toml::de::Error) -> String {
    match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {}", err.message())
        }
        None => err.message().to_string(),
    }
}
