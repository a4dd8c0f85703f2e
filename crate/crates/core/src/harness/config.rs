//! Scenario configuration and its file format.
//!
//! The config file is flat `key = value` text under `[section]` headers;
//! `#` and `;` start comment lines. Keys carry their unit as a suffix
//! (`_s`, `_ms`, `_us`). Anything not set keeps its default, and unknown
//! keys are rejected rather than ignored. See the repository README for
//! the full key list.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::sim::Duration;
use crate::world::{Protocol, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficModel {
    /// Fixed period per leaf with an independent uniform random phase.
    Periodic,
    /// Exponential inter-arrival times with mean `pai`.
    Poisson,
    /// No traffic at all (idle-network baselines).
    None,
}

impl fmt::Display for TrafficModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrafficModel::Periodic => "periodic",
            TrafficModel::Poisson => "poisson",
            TrafficModel::None => "none",
        };
        f.write_str(s)
    }
}

/// One run's full description.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub sim: SimConfig,
    /// Simulated run length, µs.
    pub duration: Duration,
    /// Packet arrival interval per leaf, µs.
    pub pai: Duration,
    pub traffic: TrafficModel,
    /// Packets generated before this instant are simulated but excluded
    /// from metrics, letting the WP adaptation settle.
    pub warmup: Duration,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            sim: SimConfig::default(),
            duration: 300_000_000,
            pai: 1_500_000,
            traffic: TrafficModel::Periodic,
            warmup: 500_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("config line {line}: unknown key [{section}] {key}")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("config line {line}: bad value for {key}: {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim.validate().map_err(ConfigError::Invalid)?;
        if self.duration == 0 {
            return Err(ConfigError::Invalid("duration must be positive".into()));
        }
        if self.pai == 0 {
            return Err(ConfigError::Invalid("pai must be positive".into()));
        }
        Ok(())
    }

    pub fn from_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    /// Layer `text` over the current values.
    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = "scenario".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        msg: "unterminated section header".into(),
                    });
                };
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("expected key = value, got {line:?}"),
                });
            };
            self.set(line_no, &section, k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn set(&mut self, line: usize, section: &str, key: &str, val: &str) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            msg,
        };
        macro_rules! num {
            ($ty:ty) => {
                val.parse::<$ty>().map_err(|e| bad(e.to_string()))?
            };
        }
        match (section, key) {
            ("scenario", "seed") => self.sim.seed = num!(u64),
            ("scenario", "duration_s") => self.duration = num!(u64) * 1_000_000,
            ("scenario", "duration_ms") => self.duration = num!(u64) * 1_000,
            ("scenario", "protocol") => {
                self.sim.protocol = match val {
                    "scosens" => Protocol::Scosens,
                    "lpl" => Protocol::Lpl,
                    other => return Err(bad(format!("unknown protocol {other:?}"))),
                }
            }
            ("scenario", "n_leaves") => self.sim.n_leaves = num!(u16),
            ("scenario", "pai_ms") => self.pai = num!(u64) * 1_000,
            ("scenario", "pai_us") => self.pai = num!(u64),
            ("scenario", "payload_len") => self.sim.payload_len = num!(u8),
            ("scenario", "quantization_us") => self.sim.quantization = num!(u64),
            ("scenario", "warmup_ms") => self.warmup = num!(u64) * 1_000,
            ("scenario", "traffic") => {
                self.traffic = match val {
                    "periodic" => TrafficModel::Periodic,
                    "poisson" => TrafficModel::Poisson,
                    "none" => TrafficModel::None,
                    other => return Err(bad(format!("unknown traffic model {other:?}"))),
                }
            }
            ("scenario", "leaf_queue_cap") => self.sim.leaf_queue_cap = num!(usize),
            ("scenario", "router_queue_cap") => self.sim.router_queue_cap = num!(usize),

            ("csma", "backoff_period_us") => self.sim.csma.backoff_period = num!(u64),
            ("csma", "mac_min_be") => self.sim.csma.mac_min_be = num!(u8),
            ("csma", "mac_max_be") => self.sim.csma.mac_max_be = num!(u8),
            ("csma", "max_csma_backoffs") => self.sim.csma.max_csma_backoffs = num!(u8),
            ("csma", "max_frame_attempts") => self.sim.csma.max_frame_attempts = num!(u8),
            ("csma", "ack_wait_us") => self.sim.csma.ack_wait = num!(u64),
            ("csma", "turnaround_us") => self.sim.csma.turnaround = num!(u64),
            ("csma", "retry_after_channel_failure") => {
                self.sim.csma.retry_after_channel_failure = parse_bool(val).map_err(bad)?
            }

            ("scosens", "subframe_ms") => self.sim.scosens.subframe = num!(u64) * 1_000,
            ("scosens", "alpha") => self.sim.scosens.alpha = num!(f64),
            ("scosens", "wp_min_ms") => self.sim.scosens.wp_min = num!(u64) * 1_000,
            ("scosens", "wp_max_ms") => self.sim.scosens.wp_max = num!(u64) * 1_000,
            ("scosens", "wp_initial_ms") => self.sim.scosens.wp_initial = num!(u64) * 1_000,
            ("scosens", "tp_enabled") => {
                self.sim.scosens.tp_enabled = parse_bool(val).map_err(bad)?
            }
            ("scosens", "max_tx_per_wp") => self.sim.scosens.max_tx_per_wp = num!(u32),

            ("lpl", "check_interval_ms") => self.sim.lpl.check_interval = num!(u64) * 1_000,
            ("lpl", "check_duration_ms") => self.sim.lpl.check_duration = num!(u64) * 1_000,
            ("lpl", "check_duration_us") => self.sim.lpl.check_duration = num!(u64),
            ("lpl", "strobe_gap_us") => self.sim.lpl.strobe_gap = num!(u64),
            ("lpl", "attempt_backoff_unit_ms") => {
                self.sim.lpl.attempt_backoff_unit = num!(u64) * 1_000
            }

            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

fn parse_bool(val: &str) -> Result<bool, String> {
    match val {
        "true" | "on" | "1" | "yes" => Ok(true),
        "false" | "off" | "0" | "no" => Ok(false),
        other => Err(format!("expected a boolean, got {other:?}")),
    }
}
