//! Phone-log aggregates over a segment.

use crate::data::Timestamp;

pub const PHONE_NAMES: [&str; 7] = [
    "phone_call_in",
    "phone_call_out",
    "phone_call_missed",
    "phone_sms_in",
    "phone_sms_out",
    "phone_call_duration",
    "phone_screen_min",
];

/// Events with `from <= t < to`.
pub fn in_range(stream: &[(Timestamp, f64)], from: Timestamp, to: Timestamp) -> &[(Timestamp, f64)] {
    let lo = stream.partition_point(|(t, _)| *t < from);
    let hi = stream.partition_point(|(t, _)| *t < to);
    &stream[lo..hi]
}

/// Screen-on seconds inside `[from, to)` from unlock (1) / lock (0)
/// transitions. A leading lock means the screen was on before the log
/// starts; a trailing unlock keeps it on. Both are clipped to the range.
pub fn screen_on_seconds(transitions: &[(Timestamp, f64)], from: Timestamp, to: Timestamp) -> f64 {
    let mut total = 0i64;
    let mut on_since: Option<i64> = match transitions.first() {
        Some((_, v)) if *v == 0.0 => Some(i64::MIN),
        _ => None,
    };
    let mut add = |start: i64, end: i64| {
        let s = start.max(from.0);
        let e = end.min(to.0);
        if e > s {
            total += e - s;
        }
    };
    for &(t, v) in transitions {
        if v != 0.0 {
            on_since.get_or_insert(t.0);
        } else if let Some(start) = on_since.take() {
            add(start, t.0);
        }
    }
    if let Some(start) = on_since {
        add(start, i64::MAX);
    }
    total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: i64, m: i64) -> Timestamp {
        Timestamp(h * 3600 + m * 60)
    }

    #[test]
    fn unlock_lock_inside() {
        let log = [(t(10, 5), 1.0), (t(10, 20), 0.0)];
        assert_eq!(screen_on_seconds(&log, t(10, 0), t(10, 30)), 15.0 * 60.0);
    }

    #[test]
    fn no_log_is_zero() {
        assert_eq!(screen_on_seconds(&[], t(10, 0), t(10, 30)), 0.0);
    }

    #[test]
    fn clipped_at_edges() {
        // Oracle: intersect [9:50, 10:10) and [10:25, +inf) with [10:00, 10:30).
        let log = [(t(9, 50), 1.0), (t(10, 10), 0.0), (t(10, 25), 1.0)];
        let on = [(t(9, 50), t(10, 10)), (t(10, 25), Timestamp(i64::MAX))];
        let (a, b) = (t(10, 0), t(10, 30));
        let expected: i64 = on.iter().map(|(s, e)| (e.0.min(b.0) - s.0.max(a.0)).max(0)).sum();
        assert_eq!(screen_on_seconds(&log, a, b), expected as f64);
        // Lock with no preceding unlock: on since before the log.
        assert_eq!(screen_on_seconds(&[(t(10, 12), 0.0)], a, b), 12.0 * 60.0);
    }

    #[test]
    fn range_is_half_open() {
        let s = [(t(10, 0), 1.0), (t(10, 30), 2.0)];
        assert_eq!(in_range(&s, t(10, 0), t(10, 30)).len(), 1);
    }
}
