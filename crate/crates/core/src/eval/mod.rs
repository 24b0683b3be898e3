//! Cross-validated training, candidate scoring and the offline analyses.

mod analysis;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_semi_personalized, Cohort, Segment, Timestamp, SECONDS_PER_MINUTE};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, RowKey};
use crate::labeling::{label_receptivity, LabelRow, LabeledSegment, ReceptivityLabel};
use crate::models::{
    mc_dropout_batch, train_emotion, train_receptivity, BernoulliBaseline, GaussianBaseline, GaussianNb,
    MlpSpec, ModelOutput, OlsModel, TrainedModel, MC_PASSES,
};
use crate::rng::keyed_rng;
use crate::stats::{make_cv_plan, CvMode, CvPlan};
use crate::synth::CohortTruth;
use crate::trigger::{candidate_grid, Candidate, TriggerConfig, Truth, WindowCandidates};

pub use analysis::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub cv: CvMode,
    pub receptivity: MlpSpec,
    pub emotion: MlpSpec,
    pub mc_passes: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cv: CvMode::GroupKFold { k: 5 },
            receptivity: MlpSpec::receptivity(),
            emotion: MlpSpec::emotion(),
            mc_passes: MC_PASSES,
            seed: 0,
        }
    }
}

fn sub_seed(seed: u64, key: &[&str]) -> u64 {
    keyed_rng(seed, key).random()
}

/// Labels every participant's segments from their own prompts.
pub fn label_cohort(cohort: &Cohort, segments: &[Segment]) -> Vec<LabeledSegment> {
    let mut by_p: BTreeMap<&str, Vec<Segment>> = BTreeMap::new();
    for s in segments {
        by_p.entry(s.participant_id.as_str()).or_default().push(s.clone());
    }
    cohort
        .participants
        .iter()
        .flat_map(|p| {
            let segs = by_p.remove(p.id.as_str()).unwrap_or_default();
            label_receptivity(&segs, &p.events, cohort.schema.segment_width)
        })
        .collect()
}

/// Semi-personalized min-max scaling of every row: each participant-day is
/// scaled with its own reference bounds.
pub fn normalize_matrix(matrix: &FeatureMatrix) -> Result<Array2<f64>> {
    // Features no row observes carry nothing; they stay as a 0.5 column.
    let seen: Vec<usize> = (0..matrix.names.len())
        .filter(|&j| matrix.rows.iter().any(|r| r[j].is_some()))
        .collect();
    let mut x = Array2::from_elem((matrix.len(), matrix.names.len()), 0.5);
    if seen.is_empty() {
        return Ok(x);
    }
    let dropped = matrix.names.len() - seen.len();
    let reduced;
    let m = if dropped > 0 {
        log::warn!("{dropped} feature(s) never observed, held at 0.5");
        reduced = FeatureMatrix {
            names: seen.iter().map(|&j| matrix.names[j].clone()).collect(),
            keys: matrix.keys.clone(),
            rows: matrix.rows.iter().map(|r| seen.iter().map(|&j| r[j]).collect()).collect(),
        };
        &reduced
    } else {
        matrix
    };
    let groups: BTreeSet<(&str, u32)> = m
        .keys
        .iter()
        .map(|k| (k.participant_id.as_str(), k.study_day))
        .collect();
    let groups: Vec<(&str, u32)> = groups.into_iter().collect();
    let parts = groups
        .par_iter()
        .map(|(p, d)| normalize_semi_personalized(m, p, *d))
        .collect::<Result<Vec<_>>>()?;
    for part in parts {
        for (i, row) in part.row_indices.iter().zip(part.values) {
            for (&j, v) in seen.iter().zip(row) {
                x[[*i, j]] = v;
            }
        }
    }
    Ok(x)
}

/// Labeled rows that have features.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingTable {
    pub keys: Vec<RowKey>,
    /// Row index into the feature matrix.
    pub rows: Vec<usize>,
    pub receptive: Vec<f64>,
    pub pa: Vec<Option<f64>>,
}

pub fn training_table(matrix: &FeatureMatrix, labels: &[LabelRow]) -> TrainingTable {
    let index = matrix.index();
    let mut t = TrainingTable::default();
    let mut missing = 0usize;
    for l in labels {
        let Some(y) = l.label.as_binary() else { continue };
        let Some(&i) = index.get(&(l.participant_id.as_str(), l.segment_start)) else {
            missing += 1;
            continue;
        };
        t.keys.push(matrix.keys[i].clone());
        t.rows.push(i);
        t.receptive.push(y);
        t.pa.push(if l.label == ReceptivityLabel::Receptive { l.pa_score } else { None });
    }
    if missing > 0 {
        log::info!("{missing} labeled segments have no feature row and were dropped");
    }
    t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldModels {
    pub index: usize,
    pub test_participants: Vec<String>,
    pub test_day: Option<u32>,
    pub receptivity: Option<TrainedModel>,
    pub emotion: Option<TrainedModel>,
    pub bernoulli: Option<BernoulliBaseline>,
    pub naive_bayes: Option<GaussianNb>,
    pub gaussian: Option<GaussianBaseline>,
    pub ols: Option<OlsModel>,
    /// Reasons for models that could not be trained.
    pub skipped: Vec<String>,
}

impl FoldModels {
    pub fn covers(&self, participant: &str, day: u32) -> bool {
        self.test_participants.iter().any(|p| p == participant) && self.test_day.is_none_or(|d| d == day)
    }

    fn mc_seed(&self, seed: u64) -> u64 {
        sub_seed(seed, &["mc", &self.index.to_string()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedCv {
    pub plan: CvPlan,
    pub registry_hash: String,
    pub folds: Vec<FoldModels>,
}

impl TrainedCv {
    pub fn fold_for(&self, participant: &str, day: u32) -> Option<&FoldModels> {
        self.folds.iter().find(|f| f.covers(participant, day))
    }
}

fn select(x: &Array2<f64>, rows: impl Iterator<Item = usize>) -> Array2<f64> {
    let idx: Vec<usize> = rows.collect();
    x.select(Axis(0), &idx)
}

fn train_one(
    index: usize,
    fold: &crate::stats::Fold,
    table: &TrainingTable,
    x: &Array2<f64>,
    hash: &str,
    cfg: &EvalConfig,
) -> FoldModels {
    let mut out = FoldModels {
        index,
        test_participants: fold.test_participants.clone(),
        test_day: fold.test_day,
        receptivity: None,
        emotion: None,
        bernoulli: None,
        naive_bayes: None,
        gaussian: None,
        ols: None,
        skipped: Vec::new(),
    };
    let fold_key = index.to_string();
    let xr = select(x, fold.train.iter().map(|&i| table.rows[i]));
    let yr = Array1::from_iter(fold.train.iter().map(|&i| table.receptive[i]));
    let spec = cfg.receptivity.clone().with_seed(sub_seed(cfg.seed, &["receptivity", &fold_key]));
    match train_receptivity(xr.view(), yr.view(), &spec, hash) {
        Ok(m) => out.receptivity = Some(m),
        Err(e) => out.skipped.push(format!("receptivity: {e}")),
    }
    match BernoulliBaseline::fit(yr.view()) {
        Ok(m) => out.bernoulli = Some(m),
        Err(e) => out.skipped.push(format!("bernoulli: {e}")),
    }
    match GaussianNb::fit(xr.view(), yr.view()) {
        Ok(m) => out.naive_bayes = Some(m),
        Err(e) => out.skipped.push(format!("naive_bayes: {e}")),
    }

    let emo: Vec<usize> = fold.train.iter().copied().filter(|&i| table.pa[i].is_some()).collect();
    let xe = select(x, emo.iter().map(|&i| table.rows[i]));
    let ye = Array1::from_iter(emo.iter().map(|&i| table.pa[i].unwrap()));
    let spec = cfg.emotion.clone().with_seed(sub_seed(cfg.seed, &["emotion", &fold_key]));
    match train_emotion(xe.view(), ye.view(), &spec, hash) {
        Ok(m) => out.emotion = Some(m),
        Err(e) => out.skipped.push(format!("emotion: {e}")),
    }
    match GaussianBaseline::fit(ye.view()) {
        Ok(m) => out.gaussian = Some(m),
        Err(e) => out.skipped.push(format!("gaussian: {e}")),
    }
    match OlsModel::fit(xe.view(), ye.view()) {
        Ok(m) => out.ols = Some(m),
        Err(e) => out.skipped.push(format!("ols: {e}")),
    }
    for s in &out.skipped {
        log::info!("fold {index}: {s}");
    }
    out
}

/// Trains the classifier, the emotion regressor and the baselines for every
/// fold. Folds run in parallel; each model is seeded from the run seed and
/// the fold index.
pub fn train_cv(table: &TrainingTable, x: &Array2<f64>, registry_hash: &str, cfg: &EvalConfig) -> Result<TrainedCv> {
    let plan = make_cv_plan(&table.keys, cfg.cv)?;
    let folds = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, f)| train_one(i, f, table, x, registry_hash, cfg))
        .collect();
    Ok(TrainedCv {
        plan,
        registry_hash: registry_hash.to_string(),
        folds,
    })
}

/// Receptivity probability and MC-dropout mean/variance for matrix rows.
pub fn score_rows(fold: &FoldModels, x: &Array2<f64>, rows: &[usize], hash: &str, cfg: &EvalConfig) -> Result<Vec<ModelOutput>> {
    let (Some(r), Some(e)) = (&fold.receptivity, &fold.emotion) else {
        return Err(Error::Validation(format!("fold {} has no trained models", fold.index)));
    };
    let xs = select(x, rows.iter().copied());
    let rp = r.predict(hash, xs.view())?;
    let mc = mc_dropout_batch(e, hash, xs.view(), cfg.mc_passes, fold.mc_seed(cfg.seed))?;
    Ok(rp
        .iter()
        .zip(mc)
        .map(|(&r_prob, (emo_mean, emo_var))| ModelOutput {
            r_prob,
            emo_mean,
            emo_var,
        })
        .collect())
}

/// Candidate grid of one participant-day-window and the matrix rows behind
/// each candidate (`None` without features).
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSlots {
    pub participant: String,
    pub day: u32,
    pub window: u32,
    pub start: Timestamp,
    pub end: Timestamp,
    pub slots: Vec<(Timestamp, Option<usize>)>,
}

/// Scheduling windows for every participant-day present in the matrix.
pub fn scheduling_windows(matrix: &FeatureMatrix, cohort: &Cohort, trigger: &TriggerConfig) -> Vec<WindowSlots> {
    let index = matrix.index();
    let step = trigger.step_min.unwrap_or(cohort.schema.segment_width);
    let mut days: BTreeMap<(&str, u32), i64> = BTreeMap::new();
    for k in &matrix.keys {
        let offset = cohort.schema.offset_for(&k.participant_id);
        days.entry((k.participant_id.as_str(), k.study_day))
            .or_insert_with(|| k.start.local_date(offset));
    }
    let mut out = Vec::new();
    for ((p, day), date) in days {
        let midnight = Timestamp::local_midnight(date, cohort.schema.offset_for(p));
        for w in 0..trigger.windows {
            let (a, b) = trigger.window_bounds(w);
            let start = midnight.plus_minutes(i64::from(a));
            let end = midnight.plus_minutes(i64::from(b));
            let slots = candidate_grid(start, end, step)
                .into_iter()
                .map(|t| (t, index.get(&(p, t)).copied()))
                .collect();
            out.push(WindowSlots {
                participant: p.to_string(),
                day,
                window: w,
                start,
                end,
                slots,
            });
        }
    }
    out
}

/// Scores every window's candidates with the fold model that holds the
/// participant-day out. Candidates without features or without a fold are
/// dropped; their windows may end up empty and are skipped downstream.
pub fn score_windows(
    windows: &[WindowSlots],
    trained: &TrainedCv,
    x: &Array2<f64>,
    cfg: &EvalConfig,
    truth: Option<&CohortTruth>,
) -> Result<Vec<WindowCandidates>> {
    // Batch rows per fold so one MC pass covers all of a fold's candidates.
    let mut per_fold: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for w in windows {
        if let Some(f) = trained.fold_for(&w.participant, w.day) {
            if f.receptivity.is_some() && f.emotion.is_some() {
                per_fold.entry(f.index).or_default().extend(w.slots.iter().filter_map(|s| s.1));
            }
        }
    }
    let scored: Vec<(usize, BTreeMap<usize, ModelOutput>)> = per_fold
        .into_par_iter()
        .map(|(f, mut rows)| {
            rows.sort_unstable();
            rows.dedup();
            let out = score_rows(&trained.folds[f], x, &rows, &trained.registry_hash, cfg)?;
            Ok((f, rows.into_iter().zip(out).collect()))
        })
        .collect::<Result<_>>()?;
    let scored: BTreeMap<usize, BTreeMap<usize, ModelOutput>> = scored.into_iter().collect();

    windows
        .iter()
        .map(|w| {
            let fold = trained.fold_for(&w.participant, w.day).and_then(|f| scored.get(&f.index));
            let mut candidates = Vec::new();
            let mut truths = Vec::new();
            for (t, row) in &w.slots {
                let Some(out) = row.and_then(|r| fold.and_then(|m| m.get(&r))) else { continue };
                if let Some(truth) = truth {
                    let Some(tr) = truth.at(&w.participant, *t) else { continue };
                    truths.push(Truth {
                        response_prob: tr.response_prob,
                        pa: tr.pa,
                    });
                }
                candidates.push(Candidate { time: *t, output: *out });
            }
            Ok(WindowCandidates {
                participant: w.participant.clone(),
                day: w.day,
                window: w.window,
                window_start: w.start,
                window_end: w.end,
                candidates,
                truth: truth.map(|_| truths),
            })
        })
        .collect()
}

/// Held-out predictions of every model for one labeled row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestPrediction {
    pub participant: String,
    pub start: Timestamp,
    pub receptive: f64,
    pub pa: Option<f64>,
    pub nn_prob: Option<f64>,
    pub bernoulli: Option<f64>,
    pub naive_bayes: Option<f64>,
    pub nn_pa: Option<f64>,
    pub ols_pa: Option<f64>,
    pub gaussian_pa: Option<f64>,
}

pub fn test_predictions(table: &TrainingTable, x: &Array2<f64>, trained: &TrainedCv, cfg: &EvalConfig) -> Result<Vec<TestPrediction>> {
    let parts: Vec<Vec<TestPrediction>> = trained
        .plan
        .folds
        .par_iter()
        .zip(&trained.folds)
        .map(|(fold, m)| {
            let rows: Vec<usize> = fold.test.iter().map(|&i| table.rows[i]).collect();
            if rows.is_empty() {
                return Ok(vec![]);
            }
            let xs = select(x, rows.iter().copied());
            let hash = &trained.registry_hash;
            let nn = m.receptivity.as_ref().map(|r| r.predict(hash, xs.view())).transpose()?;
            let mc = m
                .emotion
                .as_ref()
                .map(|e| mc_dropout_batch(e, hash, xs.view(), cfg.mc_passes, m.mc_seed(cfg.seed)))
                .transpose()?;
            let nb = m.naive_bayes.as_ref().map(|b| b.predict_proba(xs.view()));
            let ols = m.ols.as_ref().map(|o| o.predict(xs.view()));
            let mut rng = keyed_rng(cfg.seed, &["baselines", &m.index.to_string()]);
            let bern = m.bernoulli.map(|b| b.sample(rows.len(), &mut rng));
            let gauss = m.gaussian.map(|g| g.sample(rows.len(), &mut rng));
            Ok(fold
                .test
                .iter()
                .enumerate()
                .map(|(j, &i)| TestPrediction {
                    participant: table.keys[i].participant_id.clone(),
                    start: table.keys[i].start,
                    receptive: table.receptive[i],
                    pa: table.pa[i],
                    nn_prob: nn.as_ref().map(|v| v[j]),
                    bernoulli: bern.as_ref().map(|v| v[j]),
                    naive_bayes: nb.as_ref().map(|v| v[j]),
                    nn_pa: mc.as_ref().map(|v| v[j].0),
                    ols_pa: ols.as_ref().map(|v| v[j]),
                    gaussian_pa: gauss.as_ref().map(|v| v[j]),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<TestPrediction> = parts.into_iter().flatten().collect();
    out.sort_by(|a, b| (&a.participant, a.start).cmp(&(&b.participant, b.start)));
    Ok(out)
}

/// Local minute of day → window index.
pub fn window_of(trigger: &TriggerConfig, minute_of_day: i64) -> Option<u32> {
    (0..trigger.windows).find(|&w| {
        let (a, b) = trigger.window_bounds(w);
        (i64::from(a)..i64::from(b)).contains(&minute_of_day)
    })
}

pub(crate) fn minute_of_day(ts: Timestamp, offset: i32) -> i64 {
    ts.local_second_of_day(offset) / SECONDS_PER_MINUTE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: MetricReport,
    pub rq1: Rq1,
    pub rq2: Rq2,
    pub rq3: Option<Rq3>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub features: crate::features::FeatureConfig,
    pub eval: EvalConfig,
    pub trigger: TriggerConfig,
    pub outcome: crate::trigger::OutcomeSource,
}

/// Intermediate and final products of an in-memory run.
#[derive(Clone, Debug)]
pub struct FullRun {
    pub matrix: FeatureMatrix,
    pub labels: Vec<LabeledSegment>,
    pub table: TrainingTable,
    pub trained: TrainedCv,
    pub windows: Vec<WindowCandidates>,
    pub simulation: crate::trigger::SimulationResult,
    pub prompts: Vec<PromptRecord>,
    pub predictions: Vec<TestPrediction>,
    pub evaluation: Evaluation,
}

/// Features, labels, cross-validated models, trigger simulation and every
/// analysis, without touching the file system.
pub fn run_in_memory(cohort: &Cohort, truth: Option<&CohortTruth>, opts: &RunOptions) -> Result<FullRun> {
    opts.trigger.validate()?;
    let (segments, matrix) = crate::features::extract_cohort(cohort, &opts.features)?;
    let labels = label_cohort(cohort, &segments);
    let rows: Vec<LabelRow> = labels.iter().map(LabelRow::from).collect();
    let table = training_table(&matrix, &rows);
    let x = normalize_matrix(&matrix)?;
    let trained = train_cv(&table, &x, &matrix.registry_hash(), &opts.eval)?;
    let slots = scheduling_windows(&matrix, cohort, &opts.trigger);
    let truth = truth.filter(|_| opts.outcome == crate::trigger::OutcomeSource::GenerativeTruth);
    let windows = score_windows(&slots, &trained, &x, &opts.eval, truth)?;
    let simulation = crate::trigger::simulate_triggers(&windows, &opts.trigger, opts.outcome, opts.eval.seed)?;
    let prompts = prompt_records(cohort, &windows, &opts.trigger)?;
    let predictions = test_predictions(&table, &x, &trained, &opts.eval)?;
    let evaluation = Evaluation {
        metrics: model_metrics(&predictions),
        rq1: rq1(&prompts),
        rq2: rq2(&prompts, cohort.schema.pa_scale),
        rq3: Some(rq3(&simulation)),
    };
    Ok(FullRun {
        matrix,
        labels,
        table,
        trained,
        windows,
        simulation,
        prompts,
        predictions,
        evaluation,
    })
}

#[cfg(test)]
mod tests;
