//! Scenario files, presets, and value parsing.
//!
//! A scenario is a TOML document. Every key is optional when a preset is
//! named; a preset supplies the link rate, the one-way delay and an AQM
//! parameter set. Explicit keys and `key=value` overrides win over the
//! preset.
//!
//! ```toml
//! preset = "medium"        # low | medium | high
//! params = "refined"       # default | refined
//! pattern = "dual"         # l4s | classic | dual
//! duration = "30s"
//! seed = 7
//! runs = 100
//!
//! [link]
//! rate = "50Mbps"
//! mode = "bursty"          # bursty | smooth
//! trace_file = "traces/50mbps.trace"
//!
//! [delay]
//! one_way = "20ms"
//!
//! [aqm]
//! step_thresh = "5ms"
//! classic_protection = 0.1
//!
//! [[flows]]                # replaces `pattern` when present
//! kind = "scalable"        # scalable | reno | cubic
//! start_time = "0s"
//! duration = "30s"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aqm::AqmConfig;
use crate::error::{Error, Result};
use crate::link::LinkMode;
use crate::traffic::FlowKind;

pub const DEFAULT_DURATION: Duration = Duration::from_secs(30);

/// Parses `15ms`, `1.5s`, `250us`, `100ns`. A bare number is seconds.
pub fn parse_duration(s: &str) -> Result<Duration> {
    let s = s.trim();
    let split = s
        .find(|c: char| c.is_ascii_alphabetic() || c == 'µ')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let scale_ns: f64 = match unit.trim() {
        "" | "s" | "sec" => 1e9,
        "ms" => 1e6,
        "us" | "µs" => 1e3,
        "ns" => 1.0,
        "min" => 60e9,
        other => {
            return Err(Error::config(format!(
                "unknown duration unit {other:?} in {s:?}"
            )))
        }
    };
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("invalid duration {s:?}")))?;
    let ns = value * scale_ns;
    if !ns.is_finite() || ns < 0.0 || ns > u64::MAX as f64 {
        return Err(Error::config(format!("duration out of range: {s:?}")));
    }
    Ok(Duration::from_nanos(ns.round() as u64))
}

/// Formats a duration with the largest unit that represents it exactly.
pub fn format_duration(d: Duration) -> String {
    let ns = d.as_nanos();
    for (unit, scale) in [("s", 1_000_000_000u128), ("ms", 1_000_000), ("us", 1_000)] {
        if ns != 0 && ns.is_multiple_of(scale) {
            return format!("{}{unit}", ns / scale);
        }
    }
    if ns == 0 {
        "0s".into()
    } else {
        format!("{ns}ns")
    }
}

/// Parses `12Mbps`, `12mbit`, `1.5G`, `500kbps`, `12000000`, all in bits/s.
pub fn parse_rate(s: &str) -> Result<u64> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let unit = unit.to_ascii_lowercase();
    let unit = unit
        .trim_end_matches("bps")
        .trim_end_matches("bit")
        .trim_end_matches("b/s");
    let scale: f64 = match unit {
        "" => 1.0,
        "k" => 1e3,
        "m" => 1e6,
        "g" => 1e9,
        _ => return Err(Error::config(format!("unknown rate unit in {s:?}"))),
    };
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("invalid rate {s:?}")))?;
    let bps = (value * scale).round();
    if !bps.is_finite() || bps <= 0.0 || bps > u64::MAX as f64 {
        return Err(Error::config(format!("rate must be > 0: {s:?}")));
    }
    Ok(bps as u64)
}

pub fn format_rate(bps: u64) -> String {
    for (unit, scale) in [
        ("Gbps", 1_000_000_000u64),
        ("Mbps", 1_000_000),
        ("kbps", 1_000),
    ] {
        if bps.is_multiple_of(scale) {
            return format!("{}{unit}", bps / scale);
        }
    }
    format!("{bps}bps")
}

/// Serde adapter storing a [`Duration`] as a human-readable string.
pub mod duration_str {
    use std::time::Duration;

    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Seconds(f64),
    }

    fn convert<E: de::Error>(raw: Raw) -> Result<Duration, E> {
        match raw {
            Raw::Text(s) => super::parse_duration(&s).map_err(E::custom),
            Raw::Seconds(v) if v.is_finite() && v >= 0.0 => Ok(Duration::from_secs_f64(v)),
            Raw::Seconds(v) => Err(E::custom(format!("invalid duration {v}"))),
        }
    }

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_duration(*d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        convert(Raw::deserialize(d)?)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
            match d {
                Some(d) => s.serialize_some(&crate::scenario::format_duration(*d)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
            Option::<Raw>::deserialize(d)?.map(convert).transpose()
        }
    }
}

mod rate_str {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Bps(u64),
    }

    pub fn serialize<S: Serializer>(bps: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_rate(*bps))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Text(s) => super::parse_rate(&s).map_err(de::Error::custom),
            Raw::Bps(v) => Ok(v),
        }
    }

    pub mod opt {
        use super::*;

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
            Ok(Some(super::deserialize(d)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Low,
    Medium,
    High,
}

impl PresetName {
    pub const ALL: [PresetName; 3] = [PresetName::Low, PresetName::Medium, PresetName::High];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Low => "low",
            PresetName::Medium => "medium",
            PresetName::High => "high",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(PresetName::Low),
            "medium" => Ok(PresetName::Medium),
            "high" => Ok(PresetName::High),
            other => Err(Error::config(format!(
                "unknown preset {other:?} (expected low, medium or high)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSet {
    #[default]
    Default,
    Refined,
}

impl FromStr for ParamSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(ParamSet::Default),
            "refined" => Ok(ParamSet::Refined),
            other => Err(Error::config(format!("unknown parameter set {other:?}"))),
        }
    }
}

/// A bandwidth-delay regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: PresetName,
    pub rate_bps: u64,
    pub rtt: Duration,
}

impl Preset {
    pub fn get(name: PresetName) -> Preset {
        let (rate_bps, rtt_ms) = match name {
            PresetName::Low => (12_000_000, 20),
            PresetName::Medium => (50_000_000, 40),
            PresetName::High => (200_000_000, 100),
        };
        Preset {
            name,
            rate_bps,
            rtt: Duration::from_millis(rtt_ms),
        }
    }

    pub fn one_way_delay(&self) -> Duration {
        self.rtt / 2
    }

    pub fn bdp_bytes(&self) -> u64 {
        (self.rate_bps as u128 * self.rtt.as_nanos() / 8 / 1_000_000_000) as u64
    }

    pub fn aqm(&self, params: ParamSet) -> AqmConfig {
        let mut cfg = AqmConfig::for_link_rate(self.rate_bps);
        if params == ParamSet::Refined {
            let (step, target) = match self.name {
                PresetName::Low | PresetName::Medium => (5, 30),
                PresetName::High => (10, 45),
            };
            cfg.step_thresh = Duration::from_millis(step);
            cfg.target = Duration::from_millis(target);
        }
        cfg
    }
}

/// The three traffic mixes of the scenario matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficPattern {
    /// One scalable flow.
    L4s,
    /// One Cubic flow.
    Classic,
    /// One scalable and one Cubic flow.
    Dual,
}

impl TrafficPattern {
    pub fn flows(self) -> Vec<FlowConfig> {
        let kinds: &[FlowKind] = match self {
            TrafficPattern::L4s => &[FlowKind::Scalable],
            TrafficPattern::Classic => &[FlowKind::Cubic],
            TrafficPattern::Dual => &[FlowKind::Scalable, FlowKind::Cubic],
        };
        kinds.iter().map(|&kind| FlowConfig::new(kind)).collect()
    }
}

impl FromStr for TrafficPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l4s" => Ok(TrafficPattern::L4s),
            "classic" => Ok(TrafficPattern::Classic),
            "dual" => Ok(TrafficPattern::Dual),
            other => Err(Error::config(format!("unknown traffic pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub kind: FlowKind,
    #[serde(default, with = "duration_str")]
    pub start_time: Duration,
    /// Active time; `None` keeps the flow running until the end of the run.
    #[serde(
        default,
        with = "duration_str::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub duration: Option<Duration>,
}

impl FlowConfig {
    pub fn new(kind: FlowKind) -> Self {
        FlowConfig {
            kind,
            start_time: Duration::ZERO,
            duration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    #[serde(with = "rate_str")]
    pub rate_bps: u64,
    pub mode: LinkMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    /// Applied once in each direction.
    #[serde(with = "duration_str")]
    pub one_way: Duration,
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetName>,
    pub link: LinkConfig,
    pub delay: DelayConfig,
    pub aqm: AqmConfig,
    pub flows: Vec<FlowConfig>,
    #[serde(with = "duration_str")]
    pub duration: Duration,
    pub seed: u64,
    pub runs: u32,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    preset: Option<PresetName>,
    params: Option<ParamSet>,
    pattern: Option<TrafficPattern>,
    #[serde(default, with = "duration_str::opt")]
    duration: Option<Duration>,
    seed: Option<u64>,
    runs: Option<u32>,
    #[serde(default)]
    link: RawLink,
    #[serde(default)]
    delay: RawDelay,
    #[serde(default)]
    aqm: RawAqm,
    flows: Option<Vec<FlowConfig>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    #[serde(default, with = "rate_str::opt")]
    rate: Option<u64>,
    mode: Option<LinkMode>,
    trace_file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelay {
    #[serde(default, with = "duration_str::opt")]
    one_way: Option<Duration>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAqm {
    #[serde(default, with = "duration_str::opt")]
    target: Option<Duration>,
    #[serde(default, with = "duration_str::opt")]
    step_thresh: Option<Duration>,
    #[serde(default, with = "duration_str::opt")]
    tupdate: Option<Duration>,
    alpha: Option<f64>,
    beta: Option<f64>,
    coupling_k: Option<f64>,
    limit_bytes: Option<u64>,
    classic_protection: Option<f64>,
    ecn_classic_enabled: Option<bool>,
}

/// Parses an override value the way TOML would, falling back to a string.
fn override_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        toml::Value::Integer(v)
    } else if let Ok(v) = raw.parse::<f64>() {
        toml::Value::Float(v)
    } else if let Ok(v) = raw.parse::<bool>() {
        toml::Value::Boolean(v)
    } else {
        toml::Value::String(raw.trim_matches('"').to_string())
    }
}

/// Applies a dotted `section.key=value` override to a TOML table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("invalid override key {path:?}")));
    }
    let (last, parents) = keys.split_last().unwrap();
    let mut cursor = table;
    for key in parents {
        let entry = cursor
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override path {path:?} crosses a value")))?;
    }
    cursor.insert(last.to_string(), override_value(value));
    Ok(())
}

impl ScenarioConfig {
    /// A preset scenario with the given parameter set and traffic pattern.
    pub fn from_preset(name: PresetName, params: ParamSet, pattern: TrafficPattern) -> Self {
        let preset = Preset::get(name);
        ScenarioConfig {
            preset: Some(name),
            link: LinkConfig {
                rate_bps: preset.rate_bps,
                mode: LinkMode::Bursty,
                trace_file: None,
            },
            delay: DelayConfig {
                one_way: preset.one_way_delay(),
            },
            aqm: preset.aqm(params),
            flows: pattern.flows(),
            duration: DEFAULT_DURATION,
            seed: 1,
            runs: 1,
        }
    }

    /// Parses TOML text, applies overrides, and resolves presets.
    ///
    /// Relative `trace_file` paths are resolved against `base_dir`.
    pub fn from_toml_str(
        text: &str,
        overrides: &[String],
        base_dir: Option<&Path>,
    ) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw: RawScenario = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        let mut cfg = Self::resolve(raw)?;
        if let (Some(base), Some(trace)) = (base_dir, cfg.link.trace_file.as_mut()) {
            if trace.is_relative() {
                *trace = base.join(&*trace);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides, path.parent())
    }

    fn resolve(raw: RawScenario) -> Result<Self> {
        let preset = raw.preset.map(Preset::get);
        let rate_bps = raw
            .link
            .rate
            .or(preset.map(|p| p.rate_bps))
            .ok_or_else(|| Error::config("link.rate is required without a preset"))?;
        let one_way = raw
            .delay
            .one_way
            .or(preset.map(|p| p.one_way_delay()))
            .ok_or_else(|| Error::config("delay.one_way is required without a preset"))?;
        let params = raw.params.unwrap_or_default();
        let mut aqm = match preset {
            Some(p) => p.aqm(params),
            None if params == ParamSet::Refined => {
                return Err(Error::config("params = \"refined\" needs a preset"))
            }
            None => AqmConfig::for_link_rate(rate_bps),
        };
        // The buffer follows the resolved link rate unless set explicitly.
        aqm.limit_bytes = crate::aqm::limit_for_rate(rate_bps);
        let a = raw.aqm;
        aqm.target = a.target.unwrap_or(aqm.target);
        aqm.step_thresh = a.step_thresh.unwrap_or(aqm.step_thresh);
        aqm.tupdate = a.tupdate.unwrap_or(aqm.tupdate);
        aqm.alpha = a.alpha.unwrap_or(aqm.alpha);
        aqm.beta = a.beta.unwrap_or(aqm.beta);
        aqm.coupling_k = a.coupling_k.unwrap_or(aqm.coupling_k);
        aqm.limit_bytes = a.limit_bytes.unwrap_or(aqm.limit_bytes);
        aqm.classic_protection = a.classic_protection.unwrap_or(aqm.classic_protection);
        aqm.ecn_classic_enabled = a.ecn_classic_enabled.unwrap_or(aqm.ecn_classic_enabled);

        let flows = match (raw.flows, raw.pattern) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "give either `pattern` or [[flows]], not both",
                ))
            }
            (Some(flows), None) => flows,
            (None, Some(pattern)) => pattern.flows(),
            (None, None) => TrafficPattern::Dual.flows(),
        };
        Ok(ScenarioConfig {
            preset: raw.preset,
            link: LinkConfig {
                rate_bps,
                mode: raw.link.mode.unwrap_or_default(),
                trace_file: raw.link.trace_file,
            },
            delay: DelayConfig { one_way },
            aqm,
            flows,
            duration: raw.duration.unwrap_or(DEFAULT_DURATION),
            seed: raw.seed.unwrap_or(1),
            runs: raw.runs.unwrap_or(1),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration.is_zero() {
            return Err(Error::config("duration must be > 0"));
        }
        if self.duration > Duration::from_secs(10_000) {
            return Err(Error::config("duration must be <= 10000s"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs must be >= 1"));
        }
        if self.link.rate_bps == 0 {
            return Err(Error::config("link.rate must be > 0"));
        }
        if self.flows.is_empty() {
            return Err(Error::config("at least one flow is required"));
        }
        for (i, f) in self.flows.iter().enumerate() {
            if f.start_time >= self.duration {
                return Err(Error::config(format!(
                    "flows[{i}] starts after the run ends"
                )));
            }
            if f.duration.is_some_and(|d| d.is_zero()) {
                return Err(Error::config(format!("flows[{i}].duration must be > 0")));
            }
        }
        self.aqm.validate()
    }

    /// Hash of everything that shapes a run except the seed and run count.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.seed = 0;
        canonical.runs = 1;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Sets a single parameter by name, as used by sweeps.
    pub fn set_param(&mut self, name: &str, value: &str) -> Result<()> {
        let float = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("{name}: invalid number {value:?}")))
        };
        match name {
            "step_thresh" => self.aqm.step_thresh = parse_duration(value)?,
            "target" => self.aqm.target = parse_duration(value)?,
            "tupdate" => self.aqm.tupdate = parse_duration(value)?,
            "alpha" => self.aqm.alpha = float()?,
            "beta" => self.aqm.beta = float()?,
            "coupling_k" => self.aqm.coupling_k = float()?,
            "classic_protection" => self.aqm.classic_protection = float()?,
            other => {
                return Err(Error::config(format!(
                    "unknown sweep parameter {other:?} (expected one of {})",
                    SWEEP_PARAMS.join(", ")
                )))
            }
        }
        self.validate()
    }
}

pub const SWEEP_PARAMS: [&str; 7] = [
    "step_thresh",
    "target",
    "alpha",
    "beta",
    "coupling_k",
    "classic_protection",
    "tupdate",
];
