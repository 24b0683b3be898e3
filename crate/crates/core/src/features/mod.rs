//! Per-segment feature extraction and the feature matrix container.

pub mod hrv;
pub mod location;
pub mod phone;
pub mod sleep;
pub mod stats;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    segment_windows, ChannelKind, Cohort, Coverage, ParticipantDataset, SchemaConfig, Segment,
    Timestamp, SECONDS_PER_MINUTE,
};
use crate::error::{Error, Result};

pub use hrv::{hrv_features, validate_rr, RrConfig, HRV_NAMES};
pub use location::{cluster_locations, ClusterConfig, LocationClusters, LOCATION_NAMES};
pub use phone::{screen_on_seconds, PHONE_NAMES};
pub use sleep::{sleep_efficiency, sleep_regularity_index, SleepState, SLEEP_NAMES};
pub use stats::{stat_features, STAT_NAMES};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub participant_id: String,
    pub start: Timestamp,
    pub study_day: u32,
}

/// Rows of named features; `None` marks a masked cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub keys: Vec<RowKey>,
    pub rows: Vec<Vec<Option<f64>>>,
}

pub const FEATURES_KEY_HEADER: [&str; 3] = ["participant_id", "segment_start", "study_day"];

/// Hex SHA-256 of the newline-joined feature names.
pub fn registry_hash(names: &[String]) -> String {
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        FeatureMatrix {
            names,
            keys: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn registry_hash(&self) -> String {
        registry_hash(&self.names)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn append(&mut self, other: FeatureMatrix) {
        debug_assert_eq!(self.names, other.names);
        self.keys.extend(other.keys);
        self.rows.extend(other.rows);
    }

    /// Map from (participant, segment start) to row index.
    pub fn index(&self) -> BTreeMap<(&str, Timestamp), usize> {
        self.keys
            .iter()
            .enumerate()
            .map(|(i, k)| ((k.participant_id.as_str(), k.start), i))
            .collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            keys: self.keys.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| cols.iter().map(|&j| r[j]).collect())
                .collect(),
        }
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Validation(format!("writing features: {e}"));
        let header: Vec<&str> = FEATURES_KEY_HEADER
            .iter()
            .copied()
            .chain(self.names.iter().map(String::as_str))
            .collect();
        out.write_record(&header).map_err(csv_err)?;
        for (k, row) in self.keys.iter().zip(&self.rows) {
            let mut rec = vec![
                k.participant_id.clone(),
                k.start.0.to_string(),
                k.study_day.to_string(),
            ];
            rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("features.csv", e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            file: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
        let perr = |line: usize, message: String| Error::Parse {
            file: path.to_path_buf(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if header.len() < 3 || header.iter().take(3).ne(FEATURES_KEY_HEADER.iter().copied()) {
            return Err(perr(1, "expected participant_id,segment_start,study_day".into()));
        }
        let mut m = FeatureMatrix::new(header.iter().skip(3).map(String::from).collect());
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|_| perr(line, format!("bad number `{s}`")))
                }
            };
            let start = rec[1].parse::<i64>().map_err(|_| perr(line, "bad segment_start".into()))?;
            let study_day = rec[2].parse::<u32>().map_err(|_| perr(line, "bad study_day".into()))?;
            m.keys.push(RowKey {
                participant_id: rec[0].to_string(),
                start: Timestamp(start),
                study_day,
            });
            m.rows.push(rec.iter().skip(3).map(num).collect::<Result<_>>()?);
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Compute HRV only from beats during asleep minutes.
    pub hrv_sleep_only: bool,
    /// Keep partially covered segments.
    pub include_partial: bool,
    /// Numeric channels whose values get IQR outlier removal first.
    pub outlier_filtered: Vec<String>,
    pub rr: RrConfig,
    pub clusters: ClusterConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            hrv_sleep_only: false,
            include_partial: true,
            outlier_filtered: vec!["skin_temp".to_string()],
            rr: RrConfig::default(),
            clusters: ClusterConfig::default(),
        }
    }
}

/// Feature registry for a schema, in output column order.
pub fn feature_names(schema: &SchemaConfig) -> Vec<String> {
    let mut names: Vec<String> = schema
        .channels_of(ChannelKind::Numeric)
        .flat_map(|c| STAT_NAMES.iter().map(move |s| format!("{c}_{s}")))
        .collect();
    names.extend(HRV_NAMES.iter().map(|s| s.to_string()));
    if has_kind(schema, &[ChannelKind::SleepState]) {
        names.extend(SLEEP_NAMES.iter().map(|s| s.to_string()));
    }
    if has_kind(schema, &PHONE_KINDS) {
        names.extend(PHONE_NAMES.iter().map(|s| s.to_string()));
    }
    if has_kind(schema, &[ChannelKind::Latitude]) && has_kind(schema, &[ChannelKind::Longitude]) {
        names.extend(LOCATION_NAMES.iter().map(|s| s.to_string()));
    }
    names
}

const PHONE_KINDS: [ChannelKind; 6] = [
    ChannelKind::CallIncoming,
    ChannelKind::CallOutgoing,
    ChannelKind::CallMissed,
    ChannelKind::SmsIncoming,
    ChannelKind::SmsOutgoing,
    ChannelKind::Screen,
];

fn has_kind(schema: &SchemaConfig, kinds: &[ChannelKind]) -> bool {
    schema.channels.iter().any(|c| kinds.contains(&c.kind))
}

fn merged_stream<'a>(
    p: &'a ParticipantDataset,
    schema: &SchemaConfig,
    kind: ChannelKind,
) -> Vec<(Timestamp, f64)> {
    let mut out: Vec<(Timestamp, f64)> = schema
        .channels_of(kind)
        .flat_map(|c| p.stream(c).iter().copied())
        .collect();
    out.sort_by_key(|s| s.0);
    out
}

/// Per-minute sleep states keyed by local minute index (local seconds / 60).
fn sleep_minutes(p: &ParticipantDataset, schema: &SchemaConfig) -> BTreeMap<i64, bool> {
    merged_stream(p, schema, ChannelKind::SleepState)
        .into_iter()
        .map(|(t, v)| (t.local_seconds(p.utc_offset_min).div_euclid(60), v != 0.0))
        .collect()
}

/// Night vector for local date `d`: noon of `d - 1` to noon of `d`.
fn night(minutes: &BTreeMap<i64, bool>, d: i64) -> Vec<SleepState> {
    let start = d * 1440 - 720;
    (start..start + 1440)
        .map(|m| match minutes.get(&m) {
            Some(true) => SleepState::Asleep,
            Some(false) => SleepState::Awake,
            None => SleepState::OutOfBed,
        })
        .collect()
}

struct SleepSummary {
    by_date: BTreeMap<i64, [Option<f64>; 3]>,
}

impl SleepSummary {
    fn new(p: &ParticipantDataset, schema: &SchemaConfig) -> Self {
        let minutes = sleep_minutes(p, schema);
        let mut by_date = BTreeMap::new();
        let Some(first) = p.first_date() else {
            return SleepSummary { by_date };
        };
        let last = p.study_days().keys().last().copied().unwrap_or(first);
        let mut asleep_days: Vec<Vec<bool>> = Vec::new();
        for d in first..=last {
            let n = night(&minutes, d);
            let observed = n.iter().any(|s| *s != SleepState::OutOfBed);
            if observed {
                asleep_days.push(n.iter().map(|s| *s == SleepState::Asleep).collect());
            }
            by_date.insert(
                d,
                [
                    sleep_efficiency(&n),
                    observed.then(|| sleep::total_sleep_minutes(&n)),
                    sleep_regularity_index(&asleep_days),
                ],
            );
        }
        SleepSummary { by_date }
    }
}

/// Features for the given segments of one participant, in segment order.
pub fn extract_features(
    p: &ParticipantDataset,
    schema: &SchemaConfig,
    segments: &[Segment],
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix> {
    let names = feature_names(schema);
    let numeric: Vec<&str> = schema.channels_of(ChannelKind::Numeric).collect();
    let with_sleep = has_kind(schema, &[ChannelKind::SleepState]);
    let with_phone = has_kind(schema, &PHONE_KINDS);
    let with_loc = names.iter().any(|n| n == LOCATION_NAMES[0]);

    let sleep = with_sleep.then(|| SleepSummary::new(p, schema));
    let asleep = if cfg.hrv_sleep_only {
        Some(sleep_minutes(p, schema))
    } else {
        None
    };
    let phone_streams: Vec<Vec<(Timestamp, f64)>> = PHONE_KINDS
        .iter()
        .map(|k| merged_stream(p, schema, *k))
        .collect();

    let (loc_times, loc_labels) = if with_loc {
        let lat = merged_stream(p, schema, ChannelKind::Latitude);
        let lon: BTreeMap<Timestamp, f64> =
            merged_stream(p, schema, ChannelKind::Longitude).into_iter().collect();
        let paired: Vec<(Timestamp, [f64; 2])> = lat
            .into_iter()
            .filter_map(|(t, a)| lon.get(&t).map(|b| (t, [a, *b])))
            .collect();
        let pts: Vec<[f64; 2]> = paired.iter().map(|x| x.1).collect();
        let labels = match cluster_locations(&pts, &cfg.clusters) {
            Some(c) => c.labels,
            None => vec![None; pts.len()],
        };
        (paired.into_iter().map(|x| x.0).collect::<Vec<_>>(), labels)
    } else {
        (Vec::new(), Vec::new())
    };

    let mut m = FeatureMatrix::new(names);
    for seg in segments {
        let (from, to) = (seg.start, seg.end());
        let mut row: Vec<Option<f64>> = Vec::with_capacity(m.names.len());
        for ch in &numeric {
            let vals: Vec<f64> = phone::in_range(p.stream(ch), from, to)
                .iter()
                .map(|s| s.1)
                .collect();
            let vals = if cfg.outlier_filtered.iter().any(|c| c == ch) {
                stats::iqr_filter(&vals)
            } else {
                vals
            };
            row.extend(stat_features(&vals));
        }

        let lo = p.rr.partition_point(|r| r.timestamp < from);
        let hi = p.rr.partition_point(|r| r.timestamp < to);
        let beats: Vec<_> = p.rr[lo..hi]
            .iter()
            .filter(|r| match &asleep {
                Some(map) => map
                    .get(&r.timestamp.local_seconds(p.utc_offset_min).div_euclid(60))
                    .copied()
                    .unwrap_or(false),
                None => true,
            })
            .copied()
            .collect();
        match validate_rr(&beats, &cfg.rr) {
            Ok(valid) => {
                let rr: Vec<f64> = valid.iter().map(|r| r.rr_ms).collect();
                row.extend(hrv_features(&rr));
            }
            Err(_) => row.extend([None; 13]),
        }

        if let Some(s) = &sleep {
            let d = p.local_date(seg.start);
            row.extend(s.by_date.get(&d).copied().unwrap_or([None; 3]));
        }

        if with_phone {
            for s in &phone_streams[..5] {
                row.push(Some(phone::in_range(s, from, to).len() as f64));
            }
            let duration: f64 = phone_streams[..2]
                .iter()
                .flat_map(|s| phone::in_range(s, from, to))
                .map(|e| e.1)
                .sum();
            row.push(Some(duration));
            row.push(Some(screen_on_seconds(&phone_streams[5], from, to) / SECONDS_PER_MINUTE as f64));
        }

        if with_loc {
            let lo = loc_times.partition_point(|t| *t < from);
            let hi = loc_times.partition_point(|t| *t < to);
            row.extend(location::location_features(&loc_labels[lo..hi]));
        }

        debug_assert_eq!(row.len(), m.names.len());
        m.keys.push(RowKey {
            participant_id: p.id.clone(),
            start: seg.start,
            study_day: seg.study_day,
        });
        m.rows.push(row);
    }
    Ok(m)
}

/// Segments every participant and extracts features for the segments kept by
/// the coverage rule. Returns all segments (including empty ones) and the
/// matrix of kept segments.
pub fn extract_cohort(cohort: &Cohort, cfg: &FeatureConfig) -> Result<(Vec<Segment>, FeatureMatrix)> {
    let width = cohort.schema.segment_width;
    let parts: Vec<(Vec<Segment>, FeatureMatrix)> = cohort
        .participants
        .par_iter()
        .map(|p| {
            let segs = segment_windows(p, width)?;
            let kept: Vec<Segment> = segs
                .iter()
                .filter(|s| match s.coverage {
                    Coverage::Full => true,
                    Coverage::Partial => cfg.include_partial,
                    Coverage::Empty => false,
                })
                .cloned()
                .collect();
            let m = extract_features(p, &cohort.schema, &kept, cfg)?;
            Ok((segs, m))
        })
        .collect::<Result<_>>()?;
    let mut all_segments = Vec::new();
    let mut matrix = FeatureMatrix::new(feature_names(&cohort.schema));
    for (s, m) in parts {
        all_segments.extend(s);
        matrix.append(m);
    }
    Ok((all_segments, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PaScale, RrSample};

    fn participant() -> ParticipantDataset {
        let mut p = ParticipantDataset::new("p1", 0);
        let day = 20_000 * 86_400;
        p.streams.insert(
            "heart_rate".into(),
            (0..120).map(|m| (Timestamp(day + 36_000 + m * 60), 60.0 + m as f64)).collect(),
        );
        p.streams.insert(
            "screen".into(),
            vec![(Timestamp(day + 36_000 + 300), 1.0), (Timestamp(day + 36_000 + 1200), 0.0)],
        );
        p.streams.insert("sms_in".into(), vec![(Timestamp(day + 36_000 + 60), 1.0)]);
        p.rr = (0..100)
            .map(|i| RrSample {
                timestamp: Timestamp(day + 36_000 + i),
                rr_ms: 800.0,
            })
            .collect();
        p
    }

    #[test]
    fn registry_follows_schema() {
        let schema = SchemaConfig::standard(PaScale::PANAS_SHORT);
        let names = feature_names(&schema);
        assert_eq!(names.len(), 3 * 12 + 13 + 3 + 7 + 3);
        assert_eq!(names[0], "heart_rate_mean");
        assert_eq!(registry_hash(&names).len(), 64);
    }

    #[test]
    fn extraction_shapes_and_values() {
        let schema = SchemaConfig::standard(PaScale::PANAS_SHORT);
        let p = participant();
        let segs = segment_windows(&p, 30).unwrap();
        let m = extract_features(&p, &schema, &segs, &FeatureConfig::default()).unwrap();
        assert_eq!(m.len(), 4);
        let mean = m.column("heart_rate_mean").unwrap();
        assert_eq!(m.rows[0][mean], Some(74.5));
        assert_eq!(m.rows[0][m.column("phone_screen_min").unwrap()], Some(15.0));
        assert_eq!(m.rows[0][m.column("phone_sms_in").unwrap()], Some(1.0));
        assert_eq!(m.rows[1][m.column("phone_screen_min").unwrap()], Some(0.0));
        assert_eq!(m.rows[0][m.column("hrv_rmssd").unwrap()], Some(0.0));
        assert_eq!(m.rows[1][m.column("hrv_rmssd").unwrap()], None);
        assert_eq!(m.rows[0][m.column("steps_mean").unwrap()], None);
        assert_eq!(m.rows[0][m.column("loc_home").unwrap()], None);
    }

    #[test]
    fn csv_round_trip() {
        let schema = SchemaConfig::standard(PaScale::PANAS_SHORT);
        let p = participant();
        let segs = segment_windows(&p, 30).unwrap();
        let m = extract_features(&p, &schema, &segs, &FeatureConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        m.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        assert_eq!(FeatureMatrix::read_csv(&path).unwrap(), m);
    }
}
