//! Participant data model: sensor streams, EMA prompts, and the cohort
//! container produced by [`ingest`].
//!
//! All times are UTC seconds ([`Timestamp`]). Calendar logic (study days,
//! segment grid, scheduling windows) works in participant-local time via a
//! fixed per-participant UTC offset.

mod config;
mod ingest;
pub mod normalize;
mod segment;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{ChannelDef, ChannelKind, PaScale, SchemaConfig, TimestampFormat};
pub use ingest::{ingest, write_cohort, IngestReport, ParticipantCounts};
pub use normalize::{normalize_semi_personalized, MinMaxBounds, NormalizedRows};
pub use segment::{segment_windows, Coverage, Segment, ALLOWED_WIDTHS};

pub const SECONDS_PER_MINUTE: i64 = 60;
pub const SECONDS_PER_DAY: i64 = 86_400;
/// Prompts close one hour after notification.
pub const RESPONSE_WINDOW_MIN: i64 = 60;

/// Seconds since the Unix epoch.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn seconds(self) -> i64 {
        self.0
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Timestamp(self.0 + minutes * SECONDS_PER_MINUTE)
    }

    pub fn plus_seconds(self, seconds: i64) -> Self {
        Timestamp(self.0 + seconds)
    }

    pub fn local_seconds(self, utc_offset_min: i32) -> i64 {
        self.0 + utc_offset_min as i64 * SECONDS_PER_MINUTE
    }

    /// Participant-local calendar date as days since 1970-01-01.
    pub fn local_date(self, utc_offset_min: i32) -> i64 {
        self.local_seconds(utc_offset_min).div_euclid(SECONDS_PER_DAY)
    }

    /// Seconds elapsed since participant-local midnight.
    pub fn local_second_of_day(self, utc_offset_min: i32) -> i64 {
        self.local_seconds(utc_offset_min).rem_euclid(SECONDS_PER_DAY)
    }

    /// UTC timestamp of local midnight starting `local_date`.
    pub fn local_midnight(local_date: i64, utc_offset_min: i32) -> Self {
        Timestamp(local_date * SECONDS_PER_DAY - utc_offset_min as i64 * SECONDS_PER_MINUTE)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorSample {
    pub timestamp: Timestamp,
    pub channel: String,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrSample {
    pub timestamp: Timestamp,
    pub rr_ms: f64,
}

/// One prompt. `response_time` and `pa_score` are either both present or
/// both absent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmaEvent {
    pub notification_time: Timestamp,
    pub response_time: Option<Timestamp>,
    pub pa_score: Option<f64>,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl EmaEvent {
    pub fn answered(&self) -> bool {
        self.response_time.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        match (self.response_time, self.pa_score) {
            (Some(resp), Some(pa)) => {
                let closes = self.notification_time.plus_minutes(RESPONSE_WINDOW_MIN);
                if resp < self.notification_time {
                    return Err(Error::Validation(format!(
                        "response {} precedes notification {}",
                        resp.0, self.notification_time.0
                    )));
                }
                if resp > closes {
                    return Err(Error::Validation(format!(
                        "response {} after prompt closed at {}",
                        resp.0, closes.0
                    )));
                }
                if !pa.is_finite() || pa < self.scale_min || pa > self.scale_max {
                    return Err(Error::Validation(format!(
                        "PA score {pa} outside scale [{}, {}]",
                        self.scale_min, self.scale_max
                    )));
                }
                Ok(())
            }
            (None, None) => Ok(()),
            (Some(_), None) => Err(Error::Validation(
                "response time without a PA score".to_string(),
            )),
            (None, Some(_)) => Err(Error::Validation(
                "PA score without a response time".to_string(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantDataset {
    pub id: String,
    pub utc_offset_min: i32,
    /// Per-channel samples sorted by timestamp.
    pub streams: BTreeMap<String, Vec<(Timestamp, f64)>>,
    pub rr: Vec<RrSample>,
    /// Sorted by notification time.
    pub events: Vec<EmaEvent>,
}

impl ParticipantDataset {
    pub fn new(id: impl Into<String>, utc_offset_min: i32) -> Self {
        ParticipantDataset {
            id: id.into(),
            utc_offset_min,
            streams: BTreeMap::new(),
            rr: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn stream(&self, channel: &str) -> &[(Timestamp, f64)] {
        self.streams.get(channel).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn sample_count(&self) -> usize {
        self.streams.values().map(Vec::len).sum()
    }

    /// Earliest and latest sensor sample over all channels.
    pub fn time_range(&self) -> Option<(Timestamp, Timestamp)> {
        let first = self.streams.values().filter_map(|s| s.first()).map(|s| s.0).min()?;
        let last = self.streams.values().filter_map(|s| s.last()).map(|s| s.0).max()?;
        Some((first, last))
    }

    pub fn local_date(&self, ts: Timestamp) -> i64 {
        ts.local_date(self.utc_offset_min)
    }

    /// First local date touched by any sensor sample or prompt.
    pub fn first_date(&self) -> Option<i64> {
        let sensor = self.time_range().map(|(first, _)| self.local_date(first));
        let ema = self
            .events
            .first()
            .map(|e| self.local_date(e.notification_time));
        match (sensor, ema) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// 1-based study day of a timestamp, counted in local calendar dates from
    /// the participant's first date.
    pub fn study_day(&self, ts: Timestamp) -> u32 {
        let first = self.first_date().unwrap_or_else(|| self.local_date(ts));
        (self.local_date(ts) - first + 1).max(1) as u32
    }

    /// Mapping local date → study day for every date between the first and
    /// last observation.
    pub fn study_days(&self) -> BTreeMap<i64, u32> {
        let Some(first) = self.first_date() else {
            return BTreeMap::new();
        };
        let mut last = first;
        if let Some((_, end)) = self.time_range() {
            last = last.max(self.local_date(end));
        }
        if let Some(e) = self.events.last() {
            last = last.max(self.local_date(e.notification_time));
        }
        (first..=last)
            .map(|d| (d, (d - first + 1) as u32))
            .collect()
    }
}

/// All participants of one study, sorted by id. Immutable after ingest.
#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub schema: SchemaConfig,
    pub participants: Vec<ParticipantDataset>,
}

impl Cohort {
    pub fn participant(&self, id: &str) -> Option<&ParticipantDataset> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.participants.iter().map(|p| p.id.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(notif: i64, resp: Option<i64>, pa: Option<f64>) -> EmaEvent {
        EmaEvent {
            notification_time: Timestamp(notif),
            response_time: resp.map(Timestamp),
            pa_score: pa,
            scale_min: 5.0,
            scale_max: 25.0,
        }
    }

    #[test]
    fn local_calendar_respects_offset() {
        // 2024-01-02T02:00Z is still Jan 1 at UTC-5.
        let ts = Timestamp(19_724 * SECONDS_PER_DAY + 2 * 3600);
        assert_eq!(ts.local_date(0), 19_724);
        assert_eq!(ts.local_date(-300), 19_723);
        assert_eq!(ts.local_second_of_day(-300), 21 * 3600);
        let midnight = Timestamp::local_midnight(19_723, -300);
        assert_eq!(midnight.local_second_of_day(-300), 0);
        assert_eq!(midnight.local_date(-300), 19_723);
    }

    #[test]
    fn event_validation() {
        assert!(event(1000, Some(1600), Some(12.0)).validate().is_ok());
        assert!(event(1000, None, None).validate().is_ok());
        assert!(event(1000, Some(900), Some(12.0)).validate().is_err());
        assert!(event(1000, Some(1000 + 3601), Some(12.0)).validate().is_err());
        assert!(event(1000, Some(1200), None).validate().is_err());
        assert!(event(1000, None, Some(3.0)).validate().is_err());
        assert!(event(1000, Some(1200), Some(26.0)).validate().is_err());
    }

    #[test]
    fn study_days_count_calendar_dates() {
        let mut p = ParticipantDataset::new("p", 0);
        p.streams.insert(
            "hr".into(),
            vec![(Timestamp(SECONDS_PER_DAY + 10), 1.0), (Timestamp(3 * SECONDS_PER_DAY + 5), 1.0)],
        );
        assert_eq!(p.study_day(Timestamp(SECONDS_PER_DAY + 100)), 1);
        assert_eq!(p.study_day(Timestamp(3 * SECONDS_PER_DAY + 100)), 3);
        assert_eq!(p.study_days().len(), 3);
    }
}
