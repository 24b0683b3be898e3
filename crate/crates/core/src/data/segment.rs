use serde::{Deserialize, Serialize};

use super::{ParticipantDataset, Timestamp, SECONDS_PER_MINUTE};
use crate::error::{Error, Result};

pub const ALLOWED_WIDTHS: [u32; 5] = [10, 15, 20, 30, 60];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// The observed data span covers the whole window.
    Full,
    /// Samples present but the data span starts or ends inside the window.
    Partial,
    /// No sensor samples.
    Empty,
}

/// A fixed-width window on the participant-local grid anchored at midnight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub participant_id: String,
    pub start: Timestamp,
    pub width_min: u32,
    pub study_day: u32,
    pub sample_count: usize,
    pub coverage: Coverage,
}

impl Segment {
    pub fn end(&self) -> Timestamp {
        self.start.plus_minutes(self.width_min as i64)
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        ts >= self.start && ts < self.end()
    }

    /// Seconds of overlap between this window and `[from, to]`.
    pub fn overlap_seconds(&self, from: Timestamp, to: Timestamp) -> i64 {
        (self.end().0.min(to.0) - self.start.0.max(from.0)).max(0)
    }
}

pub(crate) fn check_width(width: u32) -> Result<()> {
    if ALLOWED_WIDTHS.contains(&width) {
        Ok(())
    } else {
        Err(Error::DisallowedWidth(width))
    }
}

/// Start of the grid cell containing `ts`.
pub(crate) fn grid_floor(ts: Timestamp, width_min: u32, utc_offset_min: i32) -> Timestamp {
    let step = width_min as i64 * SECONDS_PER_MINUTE;
    let local = ts.local_seconds(utc_offset_min);
    Timestamp(ts.0 - local.rem_euclid(step))
}

/// Typical spacing between consecutive sample instants, used as the extent
/// each sample represents. Defaults to one minute.
fn sample_extent(times: &[i64]) -> i64 {
    let mut gaps: Vec<i64> = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0)
        .collect();
    if gaps.is_empty() {
        return SECONDS_PER_MINUTE;
    }
    let mid = gaps.len() / 2;
    *gaps.select_nth_unstable(mid).1
}

/// Partitions the participant's observed sensor range into aligned windows.
pub fn segment_windows(participant: &ParticipantDataset, width: u32) -> Result<Vec<Segment>> {
    check_width(width)?;
    let mut times: Vec<i64> = participant
        .streams
        .values()
        .flat_map(|s| s.iter().map(|(t, _)| t.0))
        .collect();
    if times.is_empty() {
        return Ok(Vec::new());
    }
    times.sort_unstable();
    let first = times[0];
    let last = *times.last().unwrap();
    let span_end = last + sample_extent(&times);

    let offset = participant.utc_offset_min;
    let step = width as i64 * SECONDS_PER_MINUTE;
    let grid_start = grid_floor(Timestamp(first), width, offset).0;
    let n_cells = ((last - grid_start) / step + 1) as usize;

    let mut counts = vec![0usize; n_cells];
    for &t in &times {
        counts[((t - grid_start) / step) as usize] += 1;
    }

    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, sample_count)| {
            let start = Timestamp(grid_start + i as i64 * step);
            let covered = (start.0 + step).min(span_end) - start.0.max(first);
            let coverage = if sample_count == 0 {
                Coverage::Empty
            } else if covered >= step {
                Coverage::Full
            } else {
                Coverage::Partial
            };
            Segment {
                participant_id: participant.id.clone(),
                start,
                width_min: width,
                study_day: participant.study_day(start.max(Timestamp(first))),
                sample_count,
                coverage,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minute_data(minutes: i64, offset: i32) -> ParticipantDataset {
        let mut p = ParticipantDataset::new("p", offset);
        let base = 20_000 * 86_400 - offset as i64 * 60;
        p.streams.insert(
            "hr".into(),
            (0..minutes).map(|m| (Timestamp(base + m * 60), 70.0)).collect(),
        );
        p
    }

    #[test]
    fn sixty_minutes_width_thirty() {
        let segs = segment_windows(&minute_data(60, 0), 30).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.coverage == Coverage::Full));
    }

    #[test]
    fn forty_five_minutes_width_thirty() {
        let segs = segment_windows(&minute_data(45, 0), 30).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].coverage, Coverage::Full);
        assert_eq!(segs[1].coverage, Coverage::Partial);
    }

    #[test]
    fn width_25_rejected() {
        assert!(matches!(
            segment_windows(&minute_data(60, 0), 25),
            Err(Error::DisallowedWidth(25))
        ));
    }

    #[test]
    fn empty_participant_gives_no_segments() {
        let p = ParticipantDataset::new("p", 0);
        assert!(segment_windows(&p, 30).unwrap().is_empty());
    }

    #[test]
    fn grid_anchored_at_local_midnight() {
        // Data starting at local 00:07 with a +5:30 offset.
        let mut p = ParticipantDataset::new("p", 330);
        let midnight = Timestamp::local_midnight(20_000, 330).0;
        p.streams.insert(
            "hr".into(),
            (7..70).map(|m| (Timestamp(midnight + m * 60), 1.0)).collect(),
        );
        let segs = segment_windows(&p, 20).unwrap();
        assert_eq!(segs[0].start.0, midnight);
        assert_eq!(segs[0].coverage, Coverage::Partial);
        assert_eq!(segs.len(), 4);
    }

    #[test]
    fn gaps_are_flagged_empty() {
        let mut p = ParticipantDataset::new("p", 0);
        p.streams.insert(
            "hr".into(),
            vec![(Timestamp(0), 1.0), (Timestamp(5 * 3600), 1.0)],
        );
        let segs = segment_windows(&p, 60).unwrap();
        assert_eq!(segs.len(), 6);
        assert_eq!(
            segs.iter().filter(|s| s.coverage == Coverage::Empty).count(),
            4
        );
    }
}
