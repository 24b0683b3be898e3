//! Night-level sleep metrics from per-minute in-bed states.
//!
//! A night for local date `D` spans noon of `D - 1` to noon of `D`, 1440
//! minutes. Each minute is asleep, awake in bed, or out of bed.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SleepState {
    Asleep,
    Awake,
    OutOfBed,
}

pub const MINUTES_PER_NIGHT: usize = 1440;

pub const SLEEP_NAMES: [&str; 3] = ["sleep_efficiency", "sleep_total_min", "sleep_sri"];

/// `200 · agreement − 100` over consecutive day pairs, where agreement is the
/// fraction of minutes with the same asleep/not-asleep state 24 h apart.
/// Needs at least two equal-length days.
pub fn sleep_regularity_index(days: &[Vec<bool>]) -> Option<f64> {
    if days.len() < 2 {
        return None;
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for pair in days.windows(2) {
        let n = pair[0].len().min(pair[1].len());
        agree += (0..n).filter(|&i| pair[0][i] == pair[1][i]).count();
        total += n;
    }
    (total > 0).then(|| 200.0 * agree as f64 / total as f64 - 100.0)
}

/// Percent of in-bed minutes asleep, counting in-bed time from the first
/// in-bed minute to the final awakening (last asleep minute). Masked when
/// there is no in-bed time.
pub fn sleep_efficiency(night: &[SleepState]) -> Option<f64> {
    let first = night.iter().position(|s| *s != SleepState::OutOfBed)?;
    let end = match night.iter().rposition(|s| *s == SleepState::Asleep) {
        Some(last) => last + 1,
        None => night.iter().rposition(|s| *s != SleepState::OutOfBed)? + 1,
    };
    let span = &night[first..end];
    let in_bed = span.iter().filter(|s| **s != SleepState::OutOfBed).count();
    let asleep = span.iter().filter(|s| **s == SleepState::Asleep).count();
    (in_bed > 0).then(|| 100.0 * asleep as f64 / in_bed as f64)
}

pub fn total_sleep_minutes(night: &[SleepState]) -> f64 {
    night.iter().filter(|s| **s == SleepState::Asleep).count() as f64
}
