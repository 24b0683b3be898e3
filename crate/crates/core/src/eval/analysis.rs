use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{minute_of_day, window_of, TestPrediction};
use crate::data::{Cohort, PaScale, Timestamp, SECONDS_PER_MINUTE};
use crate::error::Result;
use crate::stats::{
    abs_z_transform, classification_metrics, fit_random_intercept_lmm, j_vs_pa_curve, ks_two_sample, paired_t_test,
    regression_metrics, repeated_measures_f, ClassificationMetrics, CurveBin, KsTest, LmmFit, MeanSd,
    RegressionMetrics, RmAnova, TTest,
};
use crate::trigger::{window_j, SimulationResult, TriggerConfig, WindowCandidates};

/// A statistic that may have failed to compute, with the reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tested<T> {
    pub value: Option<T>,
    pub error: Option<String>,
}

impl<T> From<Result<T>> for Tested<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Tested {
                value: Some(v),
                error: None,
            },
            Err(e) => Tested {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// One actual prompt with the scheduling objective at its time slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub participant: String,
    pub day: u32,
    pub window: u32,
    pub notification: Timestamp,
    pub responded: bool,
    pub pa: Option<f64>,
    pub j: f64,
    pub r_prob: f64,
    pub emo_mean: f64,
    pub emo_var: f64,
}

/// J of the candidate slot holding each prompt, normalized within the
/// prompt's scheduling window. Prompts outside every window or in a slot
/// without a scored candidate are skipped.
pub fn prompt_records(cohort: &Cohort, windows: &[WindowCandidates], trigger: &TriggerConfig) -> Result<Vec<PromptRecord>> {
    let by_key: BTreeMap<(&str, u32, u32), &WindowCandidates> = windows
        .iter()
        .map(|w| ((w.participant.as_str(), w.day, w.window), w))
        .collect();
    let width = i64::from(cohort.schema.segment_width) * SECONDS_PER_MINUTE;
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for p in &cohort.participants {
        let offset = p.utc_offset_min;
        for e in &p.events {
            let t = e.notification_time;
            let Some(w) = window_of(trigger, minute_of_day(t, offset)) else {
                skipped += 1;
                continue;
            };
            let day = p.study_day(t);
            let slot = Timestamp(t.0 - t.local_seconds(offset).rem_euclid(width));
            let Some(win) = by_key.get(&(p.id.as_str(), day, w)) else {
                skipped += 1;
                continue;
            };
            let Some(i) = win.candidates.iter().position(|c| c.time == slot) else {
                skipped += 1;
                continue;
            };
            let j = window_j(&win.candidates, trigger)?;
            let o = win.candidates[i].output;
            out.push(PromptRecord {
                participant: p.id.clone(),
                day,
                window: w,
                notification: t,
                responded: e.answered(),
                pa: e.pa_score,
                j: j[i],
                r_prob: o.r_prob,
                emo_mean: o.emo_mean,
                emo_var: o.emo_var,
            });
        }
    }
    if skipped > 0 {
        log::info!("{skipped} prompts had no scored slot and were left out of the J analyses");
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let s = crate::features::stats::sorted(values);
        let q = |p| crate::features::stats::percentile_sorted(&s, p);
        Some(BoxStats {
            n: s.len(),
            min: s[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: s[s.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rq1 {
    pub n_prompts: usize,
    /// Response indicator on J, participant random intercept.
    pub lmm: Tested<LmmFit>,
    /// Per-participant mean J, answered against unanswered prompts.
    pub anova: Tested<RmAnova>,
    pub j_responded: Option<BoxStats>,
    pub j_unresponded: Option<BoxStats>,
}

pub fn rq1(records: &[PromptRecord]) -> Rq1 {
    let y: Vec<f64> = records.iter().map(|r| f64::from(u8::from(r.responded))).collect();
    let x: Vec<f64> = records.iter().map(|r| r.j).collect();
    let g: Vec<&str> = records.iter().map(|r| r.participant.as_str()).collect();
    let mut per: BTreeMap<&str, [(f64, usize); 2]> = BTreeMap::new();
    for r in records {
        let e = &mut per.entry(r.participant.as_str()).or_default()[usize::from(r.responded)];
        e.0 += r.j;
        e.1 += 1;
    }
    let rows: Vec<(String, Option<f64>, Option<f64>)> = per
        .into_iter()
        .map(|(p, [no, yes])| {
            let m = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
            (p.to_string(), m(yes), m(no))
        })
        .collect();
    let split = |resp: bool| records.iter().filter(|r| r.responded == resp).map(|r| r.j).collect::<Vec<_>>();
    Rq1 {
        n_prompts: records.len(),
        lmm: fit_random_intercept_lmm(&y, &x, &g).into(),
        anova: repeated_measures_f(&rows).into(),
        j_responded: BoxStats::of(&split(true)),
        j_unresponded: BoxStats::of(&split(false)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rq2 {
    pub n_answered: usize,
    /// |z(PA)| on J, participant random intercept.
    pub lmm: Tested<LmmFit>,
    /// Mean J per unit PA bin; `count` is the PA label histogram.
    pub pa_curve: Vec<CurveBin>,
    /// Mean J per half-sd bin of within-participant z, from -3 to 3.
    pub z_curve: Vec<CurveBin>,
    /// Mean J over answered prompts with |z| > 1.5 and |z| < 0.5.
    pub j_extreme: Option<f64>,
    pub j_central: Option<f64>,
}

pub const Z_CURVE_LO: f64 = -3.0;
pub const Z_CURVE_WIDTH: f64 = 0.5;
pub const Z_CURVE_BINS: usize = 12;

pub fn rq2(records: &[PromptRecord], scale: PaScale) -> Rq2 {
    let answered: Vec<&PromptRecord> = records.iter().filter(|r| r.pa.is_some()).collect();
    let pa: Vec<f64> = answered.iter().map(|r| r.pa.unwrap()).collect();
    let groups: Vec<&str> = answered.iter().map(|r| r.participant.as_str()).collect();
    let absz = abs_z_transform(&pa, &groups);
    let (mut y, mut x, mut g, mut signed) = (vec![], vec![], vec![], vec![]);
    let mut stats: BTreeMap<&str, (f64, f64, f64)> = BTreeMap::new();
    for (v, p) in pa.iter().zip(&groups) {
        let e = stats.entry(p).or_default();
        e.0 += 1.0;
        e.1 += v;
        e.2 += v * v;
    }
    for (i, r) in answered.iter().enumerate() {
        let Some(z) = absz[i] else { continue };
        y.push(z);
        x.push(r.j);
        g.push(groups[i]);
        let (n, s, ss) = stats[groups[i]];
        let m = s / n;
        let sd = (ss / n - m * m).max(0.0).sqrt();
        signed.push(((pa[i] - m) / sd, r.j));
    }
    let bins = (scale.max - scale.min).round() as usize + 1;
    let pa_j: Vec<f64> = answered.iter().map(|r| r.j).collect();
    let mean_where = |f: &dyn Fn(f64) -> bool| {
        let v: Vec<f64> = y.iter().zip(&x).filter(|(z, _)| f(**z)).map(|(_, j)| *j).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Rq2 {
        n_answered: answered.len(),
        lmm: fit_random_intercept_lmm(&y, &x, &g).into(),
        pa_curve: j_vs_pa_curve(&pa_j, &pa, scale.min, 1.0, bins),
        z_curve: j_vs_pa_curve(
            &signed.iter().map(|s| s.1).collect::<Vec<_>>(),
            &signed.iter().map(|s| s.0).collect::<Vec<_>>(),
            Z_CURVE_LO,
            Z_CURVE_WIDTH,
            Z_CURVE_BINS,
        ),
        j_extreme: mean_where(&|z| z > 1.5),
        j_central: mean_where(&|z| z < 0.5),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rq3 {
    pub n_participants: usize,
    pub skipped_windows: usize,
    pub smart_rate: Option<MeanSd>,
    pub random_rate: Option<MeanSd>,
    /// Smart minus random response rate per participant.
    pub rate_test: Tested<TTest>,
    /// Predicted PA at the chosen times, pooled per policy.
    pub predicted_pa_ks: Tested<KsTest>,
    pub smart_pa: Option<MeanSd>,
    pub random_pa: Option<MeanSd>,
    /// Within-participant variance of predicted PA, smart minus random.
    pub variance_test: Tested<TTest>,
    pub smart_var: Option<MeanSd>,
    pub random_var: Option<MeanSd>,
}

pub fn rq3(sim: &SimulationResult) -> Rq3 {
    use crate::trigger::Policy;
    let ps = &sim.participants;
    let smart: Vec<f64> = ps.iter().map(|p| p.smart_rate).collect();
    let random: Vec<f64> = ps.iter().map(|p| p.random_rate).collect();
    let pa = |pol| sim.decisions.iter().filter(|d| d.policy == pol).map(|d| d.predicted_pa).collect::<Vec<_>>();
    let (spa, rpa) = (pa(Policy::Smart), pa(Policy::Random));
    let vars: Vec<(f64, f64)> = ps.iter().filter_map(|p| Some((p.smart_pa_var?, p.random_pa_var?))).collect();
    let (sv, rv): (Vec<f64>, Vec<f64>) = vars.into_iter().unzip();
    Rq3 {
        n_participants: ps.len(),
        skipped_windows: sim.skipped_windows,
        smart_rate: MeanSd::of(&smart),
        random_rate: MeanSd::of(&random),
        rate_test: paired_t_test(&smart, &random).into(),
        predicted_pa_ks: ks_two_sample(&spa, &rpa).into(),
        smart_pa: MeanSd::of(&spa),
        random_pa: MeanSd::of(&rpa),
        variance_test: paired_t_test(&sv, &rv).into(),
        smart_var: MeanSd::of(&sv),
        random_var: MeanSd::of(&rv),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMetrics {
    pub participant: String,
    pub n_labeled: usize,
    pub n_pa: usize,
    /// Keyed by model: `nn`, `bernoulli`, `naive_bayes`.
    pub classification: BTreeMap<String, ClassificationMetrics>,
    /// Keyed by model: `nn`, `ols`, `gaussian`.
    pub regression: BTreeMap<String, RegressionMetrics>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub participants: Vec<ParticipantMetrics>,
    /// Participant-level mean (sd), keyed `model.metric`.
    pub summary: BTreeMap<String, MeanSd>,
}

/// Per-participant metrics over held-out rows. Classification is skipped
/// for participants whose held-out labels are all one class.
pub fn model_metrics(preds: &[TestPrediction]) -> MetricReport {
    let mut by_p: BTreeMap<&str, Vec<&TestPrediction>> = BTreeMap::new();
    for p in preds {
        by_p.entry(p.participant.as_str()).or_default().push(p);
    }
    let mut participants = Vec::new();
    for (id, rows) in by_p {
        let mut pm = ParticipantMetrics {
            participant: id.to_string(),
            n_labeled: rows.len(),
            n_pa: rows.iter().filter(|r| r.pa.is_some()).count(),
            classification: BTreeMap::new(),
            regression: BTreeMap::new(),
            notes: Vec::new(),
        };
        let truth: Vec<f64> = rows.iter().map(|r| r.receptive).collect();
        if truth.iter().all(|v| *v == truth[0]) {
            let note = format!("held-out labels are all {}", if truth[0] == 1.0 { "responses" } else { "non-responses" });
            log::info!("{id}: classification metrics skipped, {note}");
            pm.notes.push(note);
        } else {
            let classifiers: [(&str, fn(&TestPrediction) -> Option<f64>, bool); 3] = [
                ("nn", |r| r.nn_prob, true),
                ("bernoulli", |r| r.bernoulli, false),
                ("naive_bayes", |r| r.naive_bayes, true),
            ];
            for (name, get, threshold) in classifiers {
                let pred: Option<Vec<f64>> = rows
                    .iter()
                    .map(|r| get(r).map(|v| if threshold { f64::from(u8::from(v >= 0.5)) } else { v }))
                    .collect();
                if let Some(m) = pred.and_then(|p| classification_metrics(&truth, &p).ok()) {
                    pm.classification.insert(name.to_string(), m);
                }
            }
        }
        let pa_rows: Vec<&&TestPrediction> = rows.iter().filter(|r| r.pa.is_some()).collect();
        let pa: Vec<f64> = pa_rows.iter().map(|r| r.pa.unwrap()).collect();
        let regressors: [(&str, fn(&TestPrediction) -> Option<f64>); 3] =
            [("nn", |r| r.nn_pa), ("ols", |r| r.ols_pa), ("gaussian", |r| r.gaussian_pa)];
        for (name, get) in regressors {
            let pred: Option<Vec<f64>> = pa_rows.iter().map(|r| get(r)).collect();
            if let Some(m) = pred.and_then(|p| regression_metrics(&pa, &p).ok()) {
                pm.regression.insert(name.to_string(), m);
            }
        }
        participants.push(pm);
    }
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in &participants {
        for (m, c) in &p.classification {
            cols.entry(format!("{m}.accuracy")).or_default().push(c.accuracy);
            cols.entry(format!("{m}.weighted_f1")).or_default().push(c.weighted_f1);
            cols.entry(format!("{m}.weighted_precision")).or_default().push(c.weighted_precision);
        }
        for (m, r) in &p.regression {
            cols.entry(format!("{m}.rmse")).or_default().push(r.rmse);
            if let Some(r2) = r.r2 {
                cols.entry(format!("{m}.r2")).or_default().push(r2);
            }
        }
    }
    MetricReport {
        participants,
        summary: cols.into_iter().filter_map(|(k, v)| MeanSd::of(&v).map(|m| (k, m))).collect(),
    }
}
