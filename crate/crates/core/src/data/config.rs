use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::segment::ALLOWED_WIDTHS;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    #[default]
    Epoch,
    Iso8601,
}

/// How the values of a channel in `sensors.csv` are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// Generic numeric signal summarized with statistical features.
    Numeric,
    /// Per-minute in-bed state: 1 asleep, 0 awake. Minutes without a row are
    /// out of bed.
    SleepState,
    /// Screen transitions: 1 unlock, 0 lock.
    Screen,
    /// Call events; value is the call duration in seconds.
    CallIncoming,
    CallOutgoing,
    CallMissed,
    /// Message events; value ignored.
    SmsIncoming,
    SmsOutgoing,
    /// Location coordinates; paired by timestamp.
    Latitude,
    Longitude,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDef {
    pub name: String,
    pub kind: ChannelKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaScale {
    pub min: f64,
    pub max: f64,
}

impl PaScale {
    /// Five items rated 1..5.
    pub const PANAS_SHORT: PaScale = PaScale { min: 5.0, max: 25.0 };
    /// Four items rated 1..7.
    pub const FOUR_ITEM_SEVEN_POINT: PaScale = PaScale { min: 4.0, max: 28.0 };
}

/// Study schema read from a TOML file next to the participant directories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    #[serde(default)]
    pub timestamp_format: TimestampFormat,
    #[serde(default)]
    pub utc_offset_minutes: i32,
    /// Per-participant overrides of `utc_offset_minutes`.
    #[serde(default)]
    pub participant_offsets: BTreeMap<String, i32>,
    #[serde(default = "default_width")]
    pub segment_width: u32,
    #[serde(default = "default_prompts")]
    pub daily_prompts: u32,
    pub pa_scale: PaScale,
    pub channels: Vec<ChannelDef>,
}

fn default_width() -> u32 {
    30
}

fn default_prompts() -> u32 {
    5
}

impl SchemaConfig {
    /// Registry used by the synthetic cohort generator.
    pub fn standard(pa_scale: PaScale) -> Self {
        use ChannelKind::*;
        let channels = [
            ("heart_rate", Numeric),
            ("steps", Numeric),
            ("skin_temp", Numeric),
            ("sleep_state", SleepState),
            ("screen", Screen),
            ("call_in", CallIncoming),
            ("call_out", CallOutgoing),
            ("call_missed", CallMissed),
            ("sms_in", SmsIncoming),
            ("sms_out", SmsOutgoing),
            ("lat", Latitude),
            ("lon", Longitude),
        ]
        .into_iter()
        .map(|(name, kind)| ChannelDef {
            name: name.to_string(),
            kind,
        })
        .collect();
        SchemaConfig {
            timestamp_format: TimestampFormat::Epoch,
            utc_offset_minutes: 0,
            participant_offsets: BTreeMap::new(),
            segment_width: 30,
            daily_prompts: 5,
            pa_scale,
            channels,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SchemaConfig =
            toml::from_str(text).map_err(|e| Error::config("schema", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_WIDTHS.contains(&self.segment_width) {
            return Err(Error::config(
                "segment_width",
                format!("{} not in {:?}", self.segment_width, ALLOWED_WIDTHS),
            ));
        }
        if !(self.pa_scale.min.is_finite()
            && self.pa_scale.max.is_finite()
            && self.pa_scale.min < self.pa_scale.max)
        {
            return Err(Error::config("pa_scale", "min must be below max"));
        }
        if self.daily_prompts == 0 {
            return Err(Error::config("daily_prompts", "must be positive"));
        }
        let mut seen = BTreeSet::new();
        for c in &self.channels {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::config("channels", format!("duplicate `{}`", c.name)));
            }
        }
        Ok(())
    }

    pub fn offset_for(&self, participant: &str) -> i32 {
        self.participant_offsets
            .get(participant)
            .copied()
            .unwrap_or(self.utc_offset_minutes)
    }

    pub fn channel_kind(&self, name: &str) -> Option<ChannelKind> {
        self.channels.iter().find(|c| c.name == name).map(|c| c.kind)
    }

    pub fn channels_of(&self, kind: ChannelKind) -> impl Iterator<Item = &str> {
        self.channels
            .iter()
            .filter(move |c| c.kind == kind)
            .map(|c| c.name.as_str())
    }

    pub fn registry_listing(&self) -> String {
        self.channels
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}
