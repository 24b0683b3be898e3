//! The scheduling objective `J = w_u·U² + w_r·R²` and the offline comparison
//! of J-maximizing ("smart") against uniformly random prompt times.

use std::collections::BTreeMap;

use rand::Rng;
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::data::{SECONDS_PER_MINUTE, Timestamp};
use crate::error::{Error, Result};
use crate::models::ModelOutput;
use crate::rng::keyed_rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyNorm {
    /// Min-max over the candidates of one window; 0.5 when they are all equal.
    #[default]
    WindowMinMax,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TriggerConfig {
    pub w_u: f64,
    pub w_r: f64,
    pub windows: u32,
    pub window_min: u32,
    /// Candidate spacing; `None` uses the segment width.
    pub step_min: Option<u32>,
    /// Local minute of day where the first window opens.
    pub waking_start_min: u32,
    pub waking_end_min: u32,
    pub u_norm: UncertaintyNorm,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig {
            w_u: 1.0,
            w_r: 1.0,
            windows: 5,
            window_min: 180,
            step_min: None,
            waking_start_min: 8 * 60,
            waking_end_min: 23 * 60,
            u_norm: UncertaintyNorm::WindowMinMax,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_u >= 0.0) {
            return Err(Error::config("trigger.w_u", "must be >= 0"));
        }
        if !(self.w_r >= 0.0) {
            return Err(Error::config("trigger.w_r", "must be >= 0"));
        }
        if !(self.w_u + self.w_r > 0.0) {
            return Err(Error::config("trigger", "w_u + w_r must be positive"));
        }
        if self.windows == 0 {
            return Err(Error::config("trigger.windows", "must be positive"));
        }
        if self.waking_end_min > 24 * 60 || self.waking_start_min >= self.waking_end_min {
            return Err(Error::config("trigger.waking_end_min", "waking span must lie within one day"));
        }
        if self.window_min == 0 || self.window_min > (self.waking_end_min - self.waking_start_min) / self.windows {
            return Err(Error::config("trigger.window_min", "windows must fit in the waking span without overlap"));
        }
        if self.step_min == Some(0) {
            return Err(Error::config("trigger.step_min", "must be positive"));
        }
        Ok(())
    }

    /// Local `[start, end)` minutes of day of window `i`; windows are spread
    /// evenly over the waking span.
    pub fn window_bounds(&self, i: u32) -> (u32, u32) {
        let stride = (self.waking_end_min - self.waking_start_min) / self.windows;
        let start = self.waking_start_min + i * stride;
        (start, start + self.window_min)
    }
}

pub fn objective_j(u: f64, r: f64, cfg: &TriggerConfig) -> Result<f64> {
    if cfg.w_u < 0.0 || cfg.w_r < 0.0 {
        return Err(Error::config("trigger", "weights must be nonnegative"));
    }
    Ok(cfg.w_u * u * u + cfg.w_r * r * r)
}

/// Candidate prompt times `start, start + step, ...` strictly before `end`.
pub fn candidate_grid(start: Timestamp, end: Timestamp, step_min: u32) -> Vec<Timestamp> {
    let step = i64::from(step_min.max(1)) * SECONDS_PER_MINUTE;
    (0..)
        .map(|k| start.plus_seconds(k * step))
        .take_while(|t| *t < end)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub time: Timestamp,
    pub output: ModelOutput,
}

/// U for each candidate under the configured normalization.
pub fn normalized_uncertainty(candidates: &[Candidate], mode: UncertaintyNorm) -> Vec<f64> {
    match mode {
        UncertaintyNorm::Raw => candidates.iter().map(|c| c.output.emo_var).collect(),
        UncertaintyNorm::WindowMinMax => {
            let lo = candidates.iter().map(|c| c.output.emo_var).fold(f64::INFINITY, f64::min);
            let hi = candidates.iter().map(|c| c.output.emo_var).fold(f64::NEG_INFINITY, f64::max);
            candidates
                .iter()
                .map(|c| if hi > lo { (c.output.emo_var - lo) / (hi - lo) } else { 0.5 })
                .collect()
        }
    }
}

/// J for every candidate of one window.
pub fn window_j(candidates: &[Candidate], cfg: &TriggerConfig) -> Result<Vec<f64>> {
    normalized_uncertainty(candidates, cfg.u_norm)
        .iter()
        .zip(candidates)
        .map(|(u, c)| objective_j(*u, c.output.r_prob, cfg))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub index: usize,
    pub time: Timestamp,
    pub j_value: f64,
}

/// The J-maximizing candidate; ties go to the earliest time.
pub fn select_smart(candidates: &[Candidate], cfg: &TriggerConfig) -> Result<Pick> {
    if candidates.is_empty() {
        return Err(Error::Empty("trigger candidates".into()));
    }
    let j = window_j(candidates, cfg)?;
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = j[i] > j[best] || (j[i] == j[best] && candidates[i].time < candidates[best].time);
        if better {
            best = i;
        }
    }
    Ok(Pick {
        index: best,
        time: candidates[best].time,
        j_value: j[best],
    })
}

/// Uniform draw from the candidate grid.
pub fn select_random<R: Rng>(grid: &[Timestamp], rng: &mut R) -> Result<usize> {
    if grid.is_empty() {
        return Err(Error::Empty("scheduling window".into()));
    }
    let idx: Vec<usize> = (0..grid.len()).collect();
    Ok(*idx.choose(rng).expect("nonempty"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Policy {
    Smart,
    Random,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Smart => "smart",
            Policy::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeSource {
    /// Responds iff predicted R ≥ 0.5.
    #[default]
    ModelThreshold,
    /// Responds with probability R.
    ModelBernoulli,
    /// Responds with the planted probability; synthetic cohorts only.
    GenerativeTruth,
}

/// Planted quantities at a candidate time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub response_prob: f64,
    pub pa: f64,
}

/// Candidates of one participant-day-window with their model outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCandidates {
    pub participant: String,
    pub day: u32,
    pub window: u32,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub candidates: Vec<Candidate>,
    /// Parallel to `candidates` when the source is generative truth.
    pub truth: Option<Vec<Truth>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerDecision {
    pub participant: String,
    pub day: u32,
    pub window: u32,
    pub chosen_time: Timestamp,
    pub j_value: f64,
    pub policy: Policy,
    pub r_prob: f64,
    pub predicted_pa: f64,
    pub responded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSummary {
    pub participant: String,
    pub decisions: usize,
    pub smart_rate: f64,
    pub random_rate: f64,
    /// Population variance of predicted PA at the chosen times; `None` with
    /// fewer than two decisions.
    pub smart_pa_var: Option<f64>,
    pub random_pa_var: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub decisions: Vec<TriggerDecision>,
    pub participants: Vec<ParticipantSummary>,
    pub skipped_windows: usize,
}

fn outcome(
    source: OutcomeSource,
    r_prob: f64,
    truth: Option<&Truth>,
    rng: &mut impl Rng,
) -> Result<bool> {
    let u: f64 = rng.random();
    Ok(match source {
        OutcomeSource::ModelThreshold => r_prob >= 0.5,
        OutcomeSource::ModelBernoulli => u < r_prob,
        OutcomeSource::GenerativeTruth => {
            let t = truth.ok_or_else(|| Error::Validation("generative-truth outcomes need truth tables".into()))?;
            u < t.response_prob
        }
    })
}

fn decide(
    w: &WindowCandidates,
    cfg: &TriggerConfig,
    source: OutcomeSource,
    seed: u64,
) -> Result<[TriggerDecision; 2]> {
    let j = window_j(&w.candidates, cfg)?;
    let smart = select_smart(&w.candidates, cfg)?;
    let key = |policy: Policy| {
        keyed_rng(seed, &[&w.participant, &w.day.to_string(), &w.window.to_string(), policy.as_str()])
    };
    let mut rng_random = key(Policy::Random);
    let times: Vec<Timestamp> = w.candidates.iter().map(|c| c.time).collect();
    let random = select_random(&times, &mut rng_random)?;
    let mut out = Vec::with_capacity(2);
    for (policy, idx, mut rng) in [
        (Policy::Smart, smart.index, key(Policy::Smart)),
        (Policy::Random, random, rng_random),
    ] {
        let c = &w.candidates[idx];
        let truth = w.truth.as_ref().map(|t| &t[idx]);
        out.push(TriggerDecision {
            participant: w.participant.clone(),
            day: w.day,
            window: w.window,
            chosen_time: c.time,
            j_value: j[idx],
            policy,
            r_prob: c.output.r_prob,
            predicted_pa: c.output.emo_mean,
            responded: outcome(source, c.output.r_prob, truth, &mut rng)?,
        });
    }
    Ok(out.try_into().expect("two policies"))
}

fn pop_var(v: &[f64]) -> Option<f64> {
    (v.len() >= 2).then(|| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    })
}

/// One smart and one random decision per window. Windows without
/// candidates are skipped and logged. Each decision draws from its own
/// stream keyed by participant, day, window and policy.
pub fn simulate_triggers(
    windows: &[WindowCandidates],
    cfg: &TriggerConfig,
    source: OutcomeSource,
    seed: u64,
) -> Result<SimulationResult> {
    use rayon::prelude::*;
    cfg.validate()?;
    let per_window: Vec<Option<[TriggerDecision; 2]>> = windows
        .par_iter()
        .map(|w| {
            if w.candidates.is_empty() {
                log::info!("{} day {} window {}: no feature coverage, skipped", w.participant, w.day, w.window);
                return Ok(None);
            }
            if w.truth.as_ref().is_some_and(|t| t.len() != w.candidates.len()) {
                return Err(Error::LengthMismatch(w.candidates.len(), w.truth.as_ref().unwrap().len()));
            }
            decide(w, cfg, source, seed).map(Some)
        })
        .collect::<Result<_>>()?;
    let skipped_windows = per_window.iter().filter(|d| d.is_none()).count();
    let decisions: Vec<TriggerDecision> = per_window.into_iter().flatten().flatten().collect();

    let mut by_p: BTreeMap<&str, Vec<&TriggerDecision>> = BTreeMap::new();
    for d in &decisions {
        by_p.entry(d.participant.as_str()).or_default().push(d);
    }
    let participants = by_p
        .into_iter()
        .map(|(p, ds)| {
            let of = |policy| ds.iter().filter(move |d| d.policy == policy);
            let rate = |policy| {
                let n = of(policy).count();
                of(policy).filter(|d| d.responded).count() as f64 / n as f64
            };
            let var = |policy| {
                pop_var(&of(policy).map(|d| d.predicted_pa).collect::<Vec<_>>())
            };
            ParticipantSummary {
                participant: p.to_string(),
                decisions: ds.len() / 2,
                smart_rate: rate(Policy::Smart),
                random_rate: rate(Policy::Random),
                smart_pa_var: var(Policy::Smart),
                random_pa_var: var(Policy::Random),
            }
        })
        .collect();
    Ok(SimulationResult {
        decisions,
        participants,
        skipped_windows,
    })
}

pub const SIMULATION_SUMMARY_HEADER: [&str; 6] = [
    "participant_id",
    "decisions",
    "smart_rate",
    "random_rate",
    "smart_pa_var",
    "random_pa_var",
];

pub fn write_summary_csv(result: &SimulationResult, w: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Validation(format!("writing simulation summary: {e}"));
    out.write_record(SIMULATION_SUMMARY_HEADER).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for p in &result.participants {
        out.write_record([
            p.participant.clone(),
            p.decisions.to_string(),
            p.smart_rate.to_string(),
            p.random_rate.to_string(),
            opt(p.smart_pa_var),
            opt(p.random_pa_var),
        ])
        .map_err(io)?;
    }
    out.flush().map_err(|e| Error::io("simulation_summary.csv", e))
}
