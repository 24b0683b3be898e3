//! Synthetic cohorts with planted ground truth.
//!
//! Each participant has a latent positive-affect (PA) trajectory: a random
//! intercept plus a within-day AR(1) process on a 5-minute grid. A two-state
//! availability chain (free / busy) runs alongside. The response probability
//! at time t is `logistic(c + coupling·z(t) + u_i ± Δ)` with `+Δ` when free,
//! where z is the standardized latent PA, `u_i` a participant offset and `c`
//! is calibrated so the marginal response rate equals `base_rate`.
//!
//! PA leaks into heart rate, skin temperature and RR variability;
//! availability shows in steps, heart rate, screen use and phone traffic.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{
    write_cohort, Cohort, EmaEvent, PaScale, ParticipantDataset, RrSample, SchemaConfig, Timestamp,
    SECONDS_PER_DAY, SECONDS_PER_MINUTE,
};
use crate::error::{Error, Result};
use crate::rng::keyed_rng;

/// Resolution of the latent processes and the truth tables.
pub const TRUTH_STEP_MIN: i64 = 5;
/// Local minutes of day covered by daytime sensors.
pub const DAY_START_MIN: i64 = 7 * 60;
pub const DAY_END_MIN: i64 = 23 * 60 + 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortSpec {
    pub participants: usize,
    pub days: u32,
    pub segment_width: u32,
    pub pa_scale: PaScale,
    pub pa_mean: f64,
    /// Total (between + within) latent PA sd.
    pub pa_sd: f64,
    /// Third-moment knob; 0 is symmetric.
    pub pa_skew: f64,
    /// Fraction of latent PA variance between participants.
    pub between_share: f64,
    /// AR(1) coefficient per 5-minute step.
    pub ar_phi: f64,
    /// Noise added to the latent PA when a prompt is answered.
    pub report_noise_sd: f64,
    /// Logit change per latent PA sd. Positive: happier participants respond
    /// more often.
    pub coupling: f64,
    pub base_rate: f64,
    /// Half the logit gap between free and busy states.
    pub availability_effect: f64,
    pub mean_free_min: f64,
    pub mean_busy_min: f64,
    /// Multiplier on the step and heart-rate rise while busy.
    pub busy_activity: f64,
    /// Sd of the per-participant logit offset.
    pub participant_rate_sd: f64,
    /// Multiplier on every PA-to-sensor effect.
    pub signal: f64,
    pub daily_prompts: u32,
    /// Local minutes of day spanned by the prompt windows.
    pub prompt_start_min: u32,
    pub prompt_end_min: u32,
    /// Days since the Unix epoch of study day 1.
    pub start_epoch_day: i64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            participants: 10,
            days: 14,
            segment_width: 30,
            pa_scale: PaScale::PANAS_SHORT,
            pa_mean: 15.0,
            pa_sd: 3.5,
            pa_skew: -0.2,
            between_share: 0.2,
            ar_phi: 0.93,
            report_noise_sd: 0.8,
            coupling: 0.6,
            base_rate: 0.75,
            availability_effect: 1.5,
            mean_free_min: 50.0,
            mean_busy_min: 40.0,
            busy_activity: 1.0,
            participant_rate_sd: 0.3,
            signal: 1.0,
            daily_prompts: 5,
            prompt_start_min: 8 * 60,
            prompt_end_min: 23 * 60,
            start_epoch_day: 19_786,
            seed: 0,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |f: &str, m: &str| Err(Error::config(format!("cohort.{f}"), m));
        if self.participants == 0 {
            return err("participants", "must be positive");
        }
        if self.days == 0 {
            return err("days", "must be positive");
        }
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return err("base_rate", "must lie in (0, 1)");
        }
        if !(self.pa_sd > 0.0) {
            return err("pa_sd", "must be positive");
        }
        if !(0.0..1.0).contains(&self.between_share) {
            return err("between_share", "must lie in [0, 1)");
        }
        if !(self.ar_phi > -1.0 && self.ar_phi < 1.0) {
            return err("ar_phi", "must lie in (-1, 1)");
        }
        if !(self.mean_free_min >= TRUTH_STEP_MIN as f64 && self.mean_busy_min >= TRUTH_STEP_MIN as f64) {
            return err("mean_free_min", "episode means must be at least 5 minutes");
        }
        if self.report_noise_sd < 0.0 || self.participant_rate_sd < 0.0 || self.availability_effect < 0.0 || self.busy_activity < 0.0 {
            return err("report_noise_sd", "spreads must be nonnegative");
        }
        if self.daily_prompts == 0 || self.prompt_end_min > 23 * 60 || self.prompt_start_min < DAY_START_MIN as u32 + 30 {
            return err("prompt_start_min", "prompts must fall inside the sensor day");
        }
        if self.prompt_start_min >= self.prompt_end_min {
            return err("prompt_end_min", "must exceed prompt_start_min");
        }
        if self.pa_mean < self.pa_scale.min || self.pa_mean > self.pa_scale.max {
            return err("pa_mean", "must lie within the PA scale");
        }
        self.schema().validate()
    }

    pub fn schema(&self) -> SchemaConfig {
        let mut s = SchemaConfig::standard(self.pa_scale);
        s.segment_width = self.segment_width;
        s.daily_prompts = self.daily_prompts;
        s
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("cohort spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: CohortSpec = toml::from_str(text).map_err(|e| Error::config("cohort", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn free_share(&self) -> f64 {
        self.mean_free_min / (self.mean_free_min + self.mean_busy_min)
    }

    /// Logit intercept `c` whose marginal response rate is `base_rate`,
    /// integrating over availability and the normal logit spread from PA
    /// and participant offsets.
    pub fn calibrated_intercept(&self) -> f64 {
        let tau = (self.coupling.powi(2) + self.participant_rate_sd.powi(2)).sqrt();
        let pi = self.free_share();
        let nodes: Vec<(f64, f64)> = if tau > 0.0 {
            let n = 801;
            let raw: Vec<(f64, f64)> = (0..n)
                .map(|i| {
                    let x = -8.0 + 16.0 * i as f64 / (n - 1) as f64;
                    (x, (-0.5 * x * x).exp())
                })
                .collect();
            let total: f64 = raw.iter().map(|r| r.1).sum();
            raw.into_iter().map(|(x, w)| (tau * x, w / total)).collect()
        } else {
            vec![(0.0, 1.0)]
        };
        let rate = |c: f64| {
            nodes
                .iter()
                .map(|(x, w)| {
                    w * (pi * logistic(c + x + self.availability_effect)
                        + (1.0 - pi) * logistic(c + x - self.availability_effect))
                })
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (-30.0, 30.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) < self.base_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn skewed(&self, z: f64) -> f64 {
        let g = self.pa_skew;
        (z + g * (z * z - 1.0) / 2.0) / (1.0 + g * g / 2.0).sqrt()
    }

    /// Latent PA on the reporting scale for a standardized latent value.
    pub fn pa_from_z(&self, z: f64) -> f64 {
        (self.pa_mean + self.pa_sd * self.skewed(z)).clamp(self.pa_scale.min, self.pa_scale.max)
    }
}

/// Planted state at one grid instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub timestamp: Timestamp,
    pub pa: f64,
    pub pa_z: f64,
    pub available: bool,
    pub participant_offset: f64,
    pub response_prob: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CohortTruth {
    /// Per participant, sorted by time on the 5-minute grid.
    pub rows: BTreeMap<String, Vec<TruthRow>>,
}

impl CohortTruth {
    /// The grid row in effect at `ts` (latest row not after `ts`).
    pub fn at(&self, participant: &str, ts: Timestamp) -> Option<&TruthRow> {
        let rows = self.rows.get(participant)?;
        let i = rows.partition_point(|r| r.timestamp <= ts);
        let r = rows.get(i.checked_sub(1)?)?;
        (ts.0 - r.timestamp.0 < TRUTH_STEP_MIN * SECONDS_PER_MINUTE).then_some(r)
    }
}

pub const TRUTH_PA_HEADER: [&str; 4] = ["participant_id", "timestamp", "pa", "pa_z"];
pub const TRUTH_RESP_HEADER: [&str; 5] = [
    "participant_id",
    "timestamp",
    "available",
    "participant_offset",
    "response_prob",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCohort {
    pub spec: CohortSpec,
    pub cohort: Cohort,
    pub truth: CohortTruth,
}

struct Place {
    lat: f64,
    lon: f64,
}

struct Builder<'a> {
    spec: &'a CohortSpec,
    p: ParticipantDataset,
    truth: Vec<TruthRow>,
    rng: ChaCha8Rng,
}

fn push(p: &mut ParticipantDataset, channel: &str, ts: Timestamp, v: f64) {
    p.streams.entry(channel.to_string()).or_default().push((ts, v));
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

impl Builder<'_> {
    fn midnight(&self, day: u32) -> i64 {
        (self.spec.start_epoch_day + i64::from(day) - 1) * SECONDS_PER_DAY
    }

    fn sleep(&mut self, day: u32) {
        // The night ending on the morning of `day`.
        let bed = self.midnight(day) - 30 * 60 + (self.rng.random_range(-40..40) * 60);
        let wake = self.midnight(day) + 6 * 3600 + 40 * 60 + self.rng.random_range(-30..15) * 60;
        let mut awake_run = 0;
        let latency = self.rng.random_range(5..25);
        let mut m = 0;
        let mut t = bed;
        while t < wake {
            let asleep = if m < latency {
                false
            } else if awake_run > 0 {
                awake_run -= 1;
                false
            } else if self.rng.random::<f64>() < 0.01 {
                awake_run = self.rng.random_range(2..12);
                false
            } else {
                true
            };
            push(&mut self.p, "sleep_state", Timestamp(t), f64::from(u8::from(asleep)));
            t += 60;
            m += 1;
        }
    }

    fn day(&mut self, day: u32, b_z: f64, u_i: f64, c: f64, hr_rest: f64, temp0: f64, places: &[Place]) {
        let spec = self.spec;
        let s = spec.signal;
        let within_sd = (1.0 - spec.between_share).sqrt();
        let b = b_z * spec.between_share.sqrt();
        let step = TRUTH_STEP_MIN * SECONDS_PER_MINUTE;
        let n_steps = ((DAY_END_MIN - DAY_START_MIN) / TRUTH_STEP_MIN) as usize;
        let start = self.midnight(day) + DAY_START_MIN * SECONDS_PER_MINUTE;
        let std = Normal::new(0.0, 1.0).unwrap();
        let innov = (1.0 - spec.ar_phi * spec.ar_phi).sqrt();
        let p_leave_free = TRUTH_STEP_MIN as f64 / spec.mean_free_min;
        let p_leave_busy = TRUTH_STEP_MIN as f64 / spec.mean_busy_min;

        let mut w = std.sample(&mut self.rng);
        let mut free = self.rng.random::<f64>() < spec.free_share();
        let mut grid = Vec::with_capacity(n_steps);
        for k in 0..n_steps {
            if k > 0 {
                w = spec.ar_phi * w + innov * std.sample(&mut self.rng);
                let leave = if free { p_leave_free } else { p_leave_busy };
                if self.rng.random::<f64>() < leave {
                    free = !free;
                }
            }
            let z = b + within_sd * w;
            let logit = c + spec.coupling * z + u_i + if free { spec.availability_effect } else { -spec.availability_effect };
            let row = TruthRow {
                timestamp: Timestamp(start + k as i64 * step),
                pa: spec.pa_from_z(z),
                pa_z: z,
                available: free,
                participant_offset: u_i,
                response_prob: logistic(logit),
            };
            grid.push(row);
        }

        // Minute-level channels.
        let mut screen_on_until: Option<i64> = None;
        for (k, row) in grid.iter().enumerate() {
            let busy = !row.available;
            for m in 0..TRUTH_STEP_MIN {
                let t = row.timestamp.0 + m * SECONDS_PER_MINUTE;
                let steps_mean = if busy { 4.0 + 41.0 * spec.busy_activity } else { 4.0 };
                let steps = Poisson::new(steps_mean).unwrap().sample(&mut self.rng);
                push(&mut self.p, "steps", Timestamp(t), steps);
                let hr = hr_rest + if busy { 12.0 * spec.busy_activity } else { 0.0 } + 4.0 * s * row.pa_z + 2.5 * std.sample(&mut self.rng);
                push(&mut self.p, "heart_rate", Timestamp(t), round3(hr));

                let unlock_rate = if busy { 1.0 / 90.0 } else { 1.0 / 8.0 };
                match screen_on_until {
                    Some(until) if t >= until => {
                        push(&mut self.p, "screen", Timestamp(until), 0.0);
                        screen_on_until = None;
                    }
                    _ => {}
                }
                if screen_on_until.is_none() && self.rng.random::<f64>() < unlock_rate {
                    let secs = self.rng.random_range(40..360);
                    let on = t + self.rng.random_range(0..30);
                    push(&mut self.p, "screen", Timestamp(on), 1.0);
                    screen_on_until = Some(on + secs);
                }
                let phone = |rng: &mut ChaCha8Rng, rate_free: f64| -> bool {
                    rng.random::<f64>() < if busy { rate_free / 4.0 } else { rate_free }
                };
                if phone(&mut self.rng, 1.0 / 400.0) {
                    let d = self.rng.random_range(20..600);
                    push(&mut self.p, "call_in", Timestamp(t + 7), f64::from(d));
                }
                if phone(&mut self.rng, 1.0 / 500.0) {
                    let d = self.rng.random_range(20..600);
                    push(&mut self.p, "call_out", Timestamp(t + 11), f64::from(d));
                }
                if self.rng.random::<f64>() < if busy { 1.0 / 300.0 } else { 1.0 / 1500.0 } {
                    push(&mut self.p, "call_missed", Timestamp(t + 13), 0.0);
                }
                if phone(&mut self.rng, 1.0 / 150.0) {
                    push(&mut self.p, "sms_in", Timestamp(t + 17), 1.0);
                }
                if phone(&mut self.rng, 1.0 / 200.0) {
                    push(&mut self.p, "sms_out", Timestamp(t + 23), 1.0);
                }
            }
            let mut temp = temp0 + 0.35 * s * row.pa_z + 0.15 * std.sample(&mut self.rng);
            if self.rng.random::<f64>() < 0.005 {
                temp += 5.0;
            }
            push(&mut self.p, "skin_temp", row.timestamp, round3(temp));

            if k % 3 == 0 {
                let local_min = DAY_START_MIN + k as i64 * TRUTH_STEP_MIN;
                let at_home = !(9 * 60..18 * 60).contains(&local_min) || self.rng.random::<f64>() < 0.1;
                let place = if at_home {
                    &places[0]
                } else if busy || self.rng.random::<f64>() < 0.6 {
                    &places[1]
                } else {
                    &places[self.rng.random_range(2..places.len())]
                };
                let jitter = Normal::new(0.0, 2e-4).unwrap();
                push(&mut self.p, "lat", row.timestamp, round3(place.lat * 1e3 + jitter.sample(&mut self.rng) * 1e3) / 1e3);
                push(&mut self.p, "lon", row.timestamp, round3(place.lon * 1e3 + jitter.sample(&mut self.rng) * 1e3) / 1e3);
            }
        }
        if let Some(until) = screen_on_until {
            push(&mut self.p, "screen", Timestamp(until), 0.0);
        }

        // RR bursts: three minutes at the start of every half hour.
        for (k, row) in grid.iter().enumerate() {
            if k % 6 != 0 {
                continue;
            }
            let hr = hr_rest + if row.available { 0.0 } else { 12.0 * spec.busy_activity } + 4.0 * s * row.pa_z;
            let base = 60_000.0 / hr;
            let amp = (25.0 * (1.0 + 0.3 * s * row.pa_z)).max(2.0);
            let mut elapsed = 0.0;
            while elapsed < 180_000.0 {
                let phase = 2.0 * std::f64::consts::PI * 0.25 * elapsed / 1000.0;
                let mut rr = base + amp * phase.sin() + 12.0 * std.sample(&mut self.rng);
                if self.rng.random::<f64>() < 0.003 {
                    rr *= if self.rng.random() { 0.5 } else { 1.9 };
                }
                let rr = rr.round();
                self.p.rr.push(RrSample {
                    timestamp: Timestamp(row.timestamp.0 + (elapsed / 1000.0) as i64),
                    rr_ms: rr,
                });
                elapsed += rr;
            }
        }

        // Prompts: one per window, answered with the planted probability.
        let span = i64::from(spec.prompt_end_min - spec.prompt_start_min);
        let n = i64::from(spec.daily_prompts);
        let delay = Exp::new(1.0 / 6.0).unwrap();
        let noise = Normal::new(0.0, spec.report_noise_sd.max(1e-12)).unwrap();
        for wi in 0..n {
            let w_start = i64::from(spec.prompt_start_min) + wi * span / n;
            let w_end = i64::from(spec.prompt_start_min) + (wi + 1) * span / n;
            let minute = self.rng.random_range(w_start..w_end);
            let notif = self.midnight(day) + minute * SECONDS_PER_MINUTE;
            // Late answers can run past the sensor day; they keep its last state.
            let truth_at = |ts: i64| &grid[(((ts - start) / step) as usize).min(grid.len() - 1)];
            let answered = self.rng.random::<f64>() < truth_at(notif).response_prob;
            let mut event = EmaEvent {
                notification_time: Timestamp(notif),
                response_time: None,
                pa_score: None,
                scale_min: spec.pa_scale.min,
                scale_max: spec.pa_scale.max,
            };
            if answered {
                let d: f64 = 1.0 + delay.sample(&mut self.rng);
                let d = d.min(55.0);
                let resp = notif + (d * 60.0) as i64;
                let reported = truth_at(resp).pa + if spec.report_noise_sd > 0.0 { noise.sample(&mut self.rng) } else { 0.0 };
                event.response_time = Some(Timestamp(resp));
                event.pa_score = Some(reported.round().clamp(spec.pa_scale.min, spec.pa_scale.max));
            }
            self.p.events.push(event);
        }
        self.truth.extend(grid);
    }
}

fn participant(spec: &CohortSpec, index: usize, c: f64) -> (ParticipantDataset, Vec<TruthRow>) {
    let id = format!("p{:03}", index + 1);
    let mut rng = keyed_rng(spec.seed, &["cohort", &id]);
    let std = Normal::new(0.0, 1.0).unwrap();
    let b_z = std.sample(&mut rng);
    let u_i = spec.participant_rate_sd * std.sample(&mut rng);
    let hr_rest = 68.0 + 6.0 * std.sample(&mut rng);
    let temp0 = 33.0 + 0.3 * std.sample(&mut rng);
    let lat0 = 40.0 + rng.random::<f64>();
    let lon0 = -75.0 + rng.random::<f64>();
    let places: Vec<Place> = (0..7)
        .map(|i| {
            if i == 0 {
                Place { lat: lat0, lon: lon0 }
            } else {
                Place {
                    lat: lat0 + rng.random_range(-0.08..0.08),
                    lon: lon0 + rng.random_range(-0.08..0.08),
                }
            }
        })
        .collect();
    let mut b = Builder {
        spec,
        p: ParticipantDataset::new(id, 0),
        truth: Vec::new(),
        rng,
    };
    for day in 1..=spec.days {
        // The first night would open study day 1 on the previous evening.
        if day > 1 {
            b.sleep(day);
        }
        b.day(day, b_z, u_i, c, hr_rest, temp0, &places);
    }
    for s in b.p.streams.values_mut() {
        s.sort_by_key(|x| x.0);
    }
    b.p.rr.sort_by_key(|r| r.timestamp);
    (b.p, b.truth)
}

/// Builds the cohort in memory. Participants use independent RNG streams,
/// so the result does not depend on thread scheduling.
pub fn generate(spec: &CohortSpec) -> Result<SyntheticCohort> {
    use rayon::prelude::*;
    spec.validate()?;
    let c = spec.calibrated_intercept();
    let built: Vec<(ParticipantDataset, Vec<TruthRow>)> =
        (0..spec.participants).into_par_iter().map(|i| participant(spec, i, c)).collect();
    let mut truth = CohortTruth::default();
    let mut participants = Vec::with_capacity(built.len());
    for (p, t) in built {
        for e in &p.events {
            e.validate()?;
        }
        truth.rows.insert(p.id.clone(), t);
        participants.push(p);
    }
    Ok(SyntheticCohort {
        spec: spec.clone(),
        cohort: Cohort {
            schema: spec.schema(),
            participants,
        },
        truth,
    })
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Generates the cohort and writes it to `dir`: the standard participant
/// directories and `schema.toml`, `truth_pa.csv`, `truth_resp.csv` and the
/// `cohort_spec.toml` snapshot.
pub fn generate_cohort(spec: &CohortSpec, dir: &Path) -> Result<SyntheticCohort> {
    let synth = generate(spec)?;
    write_cohort(dir, &synth.cohort)?;
    write_file(&dir.join("truth_pa.csv"), |w| {
        writeln!(w, "{}", TRUTH_PA_HEADER.join(","))?;
        for (id, rows) in &synth.truth.rows {
            for r in rows {
                writeln!(w, "{id},{},{},{}", r.timestamp.0, r.pa, r.pa_z)?;
            }
        }
        Ok(())
    })?;
    write_file(&dir.join("truth_resp.csv"), |w| {
        writeln!(w, "{}", TRUTH_RESP_HEADER.join(","))?;
        for (id, rows) in &synth.truth.rows {
            for r in rows {
                writeln!(
                    w,
                    "{id},{},{},{},{}",
                    r.timestamp.0,
                    u8::from(r.available),
                    r.participant_offset,
                    r.response_prob
                )?;
            }
        }
        Ok(())
    })?;
    let spec_path = dir.join("cohort_spec.toml");
    fs::write(&spec_path, spec.to_toml()).map_err(|e| Error::io(&spec_path, e))?;
    Ok(synth)
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Err(Error::MissingTruth(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let found = r.headers().map_err(|e| Error::Validation(e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`", header.join(",")),
        });
    }
    r.records()
        .map(|rec| rec.map_err(|e| Error::Validation(format!("{}: {e}", path.display()))))
        .collect()
}

/// Reads the planted ground truth of a generated cohort directory.
pub fn cohort_truth(dir: &Path) -> Result<CohortTruth> {
    let pa_path = dir.join("truth_pa.csv");
    let resp_path = dir.join("truth_resp.csv");
    let pa = read_rows(&pa_path, &TRUTH_PA_HEADER)?;
    let resp = read_rows(&resp_path, &TRUTH_RESP_HEADER)?;
    if pa.len() != resp.len() {
        return Err(Error::LengthMismatch(pa.len(), resp.len()));
    }
    let num = |path: &Path, line: usize, s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| Error::Parse {
            file: path.to_path_buf(),
            line,
            message: format!("bad number `{s}`"),
        })
    };
    let mut truth = CohortTruth::default();
    for (i, (a, b)) in pa.iter().zip(&resp).enumerate() {
        let line = i + 2;
        if a[0] != b[0] || a[1] != b[1] {
            return Err(Error::Parse {
                file: resp_path.clone(),
                line,
                message: "rows out of step with truth_pa.csv".into(),
            });
        }
        let row = TruthRow {
            timestamp: Timestamp(num(&pa_path, line, &a[1])? as i64),
            pa: num(&pa_path, line, &a[2])?,
            pa_z: num(&pa_path, line, &a[3])?,
            available: &b[2] == "1",
            participant_offset: num(&resp_path, line, &b[3])?,
            response_prob: num(&resp_path, line, &b[4])?,
        };
        truth.rows.entry(a[0].to_string()).or_default().push(row);
    }
    Ok(truth)
}
