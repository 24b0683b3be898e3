//! Receptivity and positive-affect labels for segments.
//!
//! An answered prompt marks the `window` minutes before its response as
//! receptive and gives them its PA score. An unanswered prompt marks the 60
//! minutes after notification as non-receptive. A segment takes a label when
//! at least half of it lies inside the span. Receptive beats non-receptive;
//! among several responses the one nearest the segment midpoint wins.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{EmaEvent, PaScale, Segment, Timestamp, RESPONSE_WINDOW_MIN, SECONDS_PER_MINUTE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceptivityLabel {
    Receptive,
    NonReceptive,
    Unlabeled,
}

impl ReceptivityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ReceptivityLabel::Receptive => "receptive",
            ReceptivityLabel::NonReceptive => "non_receptive",
            ReceptivityLabel::Unlabeled => "unlabeled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "receptive" => Some(ReceptivityLabel::Receptive),
            "non_receptive" => Some(ReceptivityLabel::NonReceptive),
            "unlabeled" => Some(ReceptivityLabel::Unlabeled),
            _ => None,
        }
    }

    /// 1 for receptive, 0 for non-receptive.
    pub fn as_binary(self) -> Option<f64> {
        match self {
            ReceptivityLabel::Receptive => Some(1.0),
            ReceptivityLabel::NonReceptive => Some(0.0),
            ReceptivityLabel::Unlabeled => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub segment: Segment,
    pub receptivity: ReceptivityLabel,
    pub pa_score: Option<f64>,
    /// Index into the participant's event list.
    pub source_event: Option<usize>,
}

/// Span a labeled segment must half-cover.
pub fn response_span(response: Timestamp, window_min: u32) -> (Timestamp, Timestamp) {
    (response.plus_minutes(-(window_min as i64)), response)
}

pub fn non_response_span(notification: Timestamp) -> (Timestamp, Timestamp) {
    (notification, notification.plus_minutes(RESPONSE_WINDOW_MIN))
}

fn half_covered(seg: &Segment, span: (Timestamp, Timestamp)) -> bool {
    2 * seg.overlap_seconds(span.0, span.1) >= seg.width_min as i64 * SECONDS_PER_MINUTE
}

fn midpoint2(seg: &Segment) -> i64 {
    seg.start.0 + seg.end().0
}

/// Labels one participant's segments from that participant's events.
pub fn label_receptivity(segments: &[Segment], events: &[EmaEvent], window_min: u32) -> Vec<LabeledSegment> {
    segments
        .iter()
        .map(|seg| {
            let mid2 = midpoint2(seg);
            let nearest = |pick: &dyn Fn(&EmaEvent) -> Option<Timestamp>,
                           span: &dyn Fn(Timestamp) -> (Timestamp, Timestamp)| {
                events
                    .iter()
                    .enumerate()
                    .filter_map(|(i, e)| pick(e).map(|t| (i, t)))
                    .filter(|(_, t)| half_covered(seg, span(*t)))
                    .min_by_key(|(i, t)| ((2 * t.0 - mid2).abs(), *i))
                    .map(|(i, _)| i)
            };
            let receptive = nearest(&|e| e.response_time, &|t| response_span(t, window_min));
            if let Some(i) = receptive {
                return LabeledSegment {
                    segment: seg.clone(),
                    receptivity: ReceptivityLabel::Receptive,
                    pa_score: events[i].pa_score,
                    source_event: Some(i),
                };
            }
            let unanswered = nearest(
                &|e| (!e.answered()).then_some(e.notification_time),
                &non_response_span,
            );
            match unanswered {
                Some(i) => LabeledSegment {
                    segment: seg.clone(),
                    receptivity: ReceptivityLabel::NonReceptive,
                    pa_score: None,
                    source_event: Some(i),
                },
                None => LabeledSegment {
                    segment: seg.clone(),
                    receptivity: ReceptivityLabel::Unlabeled,
                    pa_score: None,
                    source_event: None,
                },
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub receptive: usize,
    pub non_receptive: usize,
    pub unlabeled: usize,
    /// Unit-width PA bins starting at the scale minimum: (bin start, count).
    pub pa_histogram: Vec<(f64, usize)>,
}

pub fn label_distribution(labeled: &[LabeledSegment], scale: PaScale) -> LabelDistribution {
    let bins = (scale.max - scale.min).floor() as usize + 1;
    let mut hist = vec![0usize; bins];
    let mut out = LabelDistribution {
        receptive: 0,
        non_receptive: 0,
        unlabeled: 0,
        pa_histogram: Vec::new(),
    };
    for l in labeled {
        match l.receptivity {
            ReceptivityLabel::Receptive => out.receptive += 1,
            ReceptivityLabel::NonReceptive => out.non_receptive += 1,
            ReceptivityLabel::Unlabeled => out.unlabeled += 1,
        }
        if let Some(pa) = l.pa_score {
            let b = ((pa - scale.min).floor().max(0.0) as usize).min(bins - 1);
            hist[b] += 1;
        }
    }
    out.pa_histogram = hist
        .into_iter()
        .enumerate()
        .map(|(i, c)| (scale.min + i as f64, c))
        .collect();
    out
}

pub const LABELS_HEADER: [&str; 6] = [
    "participant_id",
    "segment_start",
    "width",
    "label",
    "pa_score",
    "source_event",
];

/// Writes `labels.csv` rows. Only the columns of the header are stored; the
/// segment coverage fields are not.
pub fn write_labels(labeled: &[LabeledSegment], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Validation(format!("writing labels: {e}"));
    out.write_record(LABELS_HEADER).map_err(err)?;
    for l in labeled {
        out.write_record([
            l.segment.participant_id.clone(),
            l.segment.start.0.to_string(),
            l.segment.width_min.to_string(),
            l.receptivity.as_str().to_string(),
            l.pa_score.map(|v| v.to_string()).unwrap_or_default(),
            l.source_event.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| Error::io("labels.csv", e))
}

/// One row of `labels.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelRow {
    pub participant_id: String,
    pub segment_start: Timestamp,
    pub width_min: u32,
    pub label: ReceptivityLabel,
    pub pa_score: Option<f64>,
    pub source_event: Option<usize>,
}

impl From<&LabeledSegment> for LabelRow {
    fn from(l: &LabeledSegment) -> Self {
        LabelRow {
            participant_id: l.segment.participant_id.clone(),
            segment_start: l.segment.start,
            width_min: l.segment.width_min,
            label: l.receptivity,
            pa_score: l.pa_score,
            source_event: l.source_event,
        }
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let perr = |line: usize, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| perr(1, e.to_string()))?;
    let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if header.iter().ne(LABELS_HEADER.iter().copied()) {
        return Err(perr(1, format!("expected header {}", LABELS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| perr(line, e.to_string()))?;
        let bad = |what: &str| perr(line, format!("bad {what}"));
        out.push(LabelRow {
            participant_id: rec[0].to_string(),
            segment_start: Timestamp(rec[1].parse().map_err(|_| bad("segment_start"))?),
            width_min: rec[2].parse().map_err(|_| bad("width"))?,
            label: ReceptivityLabel::parse(&rec[3]).ok_or_else(|| bad("label"))?,
            pa_score: if rec[4].is_empty() {
                None
            } else {
                Some(rec[4].parse().map_err(|_| bad("pa_score"))?)
            },
            source_event: if rec[5].is_empty() {
                None
            } else {
                Some(rec[5].parse().map_err(|_| bad("source_event"))?)
            },
        });
    }
    Ok(out)
}
