//! Pipeline stages over an output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use smartema::data::{ingest, segment_windows, SchemaConfig};
use smartema::eval::{
    label_cohort, model_metrics, normalize_matrix, prompt_records, rq1, rq2, rq3, score_windows, scheduling_windows,
    test_predictions, train_cv, training_table, TrainedCv,
};
use smartema::features::extract_cohort;
use smartema::labeling::{read_labels, write_labels, LabelRow};
use smartema::synth::{cohort_truth, generate_cohort};
use smartema::trigger::{simulate_triggers, write_summary_csv, OutcomeSource, SimulationResult};
use smartema::{Cohort, FeatureMatrix};

use crate::artifacts::*;
use crate::candidates::{read_candidates, write_candidates};
use crate::config::Resolved;
use crate::report::build_report;
use crate::store::{content_hash, read_json, write_atomic, write_json, Manifest, StageRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Label,
    Features,
    Train,
    Simulate,
    Evaluate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Label => "label",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Simulate => "simulate",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    UpToDate,
}

struct Input {
    key: String,
    path: PathBuf,
    /// What to do when it is missing.
    hint: String,
}

pub struct Runner {
    out: PathBuf,
    run: Resolved,
    manifest: Manifest,
    cohort: Option<Cohort>,
    /// Re-run stages even when inputs and config are unchanged.
    pub force: bool,
}

impl Runner {
    pub fn new(out: &Path, run: Resolved) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Runner {
            out: out.to_path_buf(),
            manifest: Manifest::load(out)?,
            run,
            cohort: None,
            force: false,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn cohort_dir(&self) -> PathBuf {
        match &self.run.cfg.paths.cohort {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.out.join(p),
            None => self.out.join(COHORT_DIR),
        }
    }

    fn cohort_key(&self) -> String {
        match &self.run.cfg.paths.cohort {
            Some(p) => p.display().to_string(),
            None => COHORT_DIR.to_string(),
        }
    }

    fn schema_path(&self) -> PathBuf {
        match &self.run.cfg.paths.schema {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.out.join(p),
            None => self.cohort_dir().join("schema.toml"),
        }
    }

    fn cohort_inputs(&self) -> Vec<Input> {
        let hint = if self.run.cfg.paths.cohort.is_none() {
            "run `smartema generate` first".to_string()
        } else {
            "point `paths.cohort` at a cohort directory or run `smartema generate`".to_string()
        };
        let mut v = vec![Input {
            key: self.cohort_key(),
            path: self.cohort_dir(),
            hint,
        }];
        if let Some(s) = &self.run.cfg.paths.schema {
            v.push(Input {
                key: s.display().to_string(),
                path: self.schema_path(),
                hint: "check `paths.schema`".into(),
            });
        }
        v
    }

    fn artifact(&self, name: &str, producer: Stage) -> Input {
        Input {
            key: name.to_string(),
            path: self.path(name),
            hint: format!("run `smartema {producer}` first"),
        }
    }

    fn inputs(&self, stage: Stage) -> Vec<Input> {
        let mut v = Vec::new();
        match stage {
            Stage::Generate => {}
            Stage::Label | Stage::Features => v.extend(self.cohort_inputs()),
            Stage::Train => {
                v.push(self.artifact(FEATURES, Stage::Features));
                v.push(self.artifact(LABELS, Stage::Label));
            }
            Stage::Simulate => {
                v.extend(self.cohort_inputs());
                v.push(self.artifact(FEATURES, Stage::Features));
                v.push(self.artifact(MODELS, Stage::Train));
            }
            Stage::Evaluate => {
                v.extend(self.cohort_inputs());
                v.push(self.artifact(FEATURES, Stage::Features));
                v.push(self.artifact(LABELS, Stage::Label));
                v.push(self.artifact(MODELS, Stage::Train));
                v.push(self.artifact(CANDIDATES, Stage::Simulate));
                v.push(self.artifact(SIMULATION, Stage::Simulate));
            }
            Stage::Report => {
                // Optional: missing ones become stub sections.
                for (name, producer) in [
                    (METRICS, Stage::Evaluate),
                    (STATS, Stage::Evaluate),
                    (CURVE, Stage::Evaluate),
                    (SIMULATION, Stage::Simulate),
                    (SIMULATION_SUMMARY, Stage::Simulate),
                ] {
                    if self.path(name).exists() {
                        v.push(self.artifact(name, producer));
                    }
                }
            }
        }
        v
    }

    fn outputs(&self, stage: Stage) -> Vec<(String, PathBuf)> {
        let names: &[&str] = match stage {
            Stage::Generate => return vec![(self.cohort_key(), self.cohort_dir())],
            Stage::Label => &[LABELS],
            Stage::Features => &[FEATURES],
            Stage::Train => &[MODELS],
            Stage::Simulate => &[CANDIDATES, SIMULATION, SIMULATION_SUMMARY],
            Stage::Evaluate => &[METRICS, STATS, CURVE],
            Stage::Report => &[REPORT_DIR],
        };
        names.iter().map(|n| (n.to_string(), self.path(n))).collect()
    }

    /// Runs one stage unless its record shows the same config, inputs and
    /// outputs.
    pub fn run_stage(&mut self, stage: Stage) -> Result<Outcome> {
        let inputs = self.inputs(stage);
        for i in &inputs {
            if !i.path.exists() {
                bail!("{stage}: `{}` not found; {}", i.key, i.hint);
            }
        }
        let mut in_hashes = BTreeMap::new();
        for i in &inputs {
            in_hashes.insert(i.key.clone(), content_hash(&i.path)?);
        }
        if !self.force && self.up_to_date(stage, &in_hashes)? {
            log::info!("{stage}: up to date");
            return Ok(Outcome::UpToDate);
        }
        log::info!("{stage}: running");
        self.exec(stage).with_context(|| format!("stage `{stage}`"))?;
        let mut out_hashes = BTreeMap::new();
        for (key, path) in self.outputs(stage) {
            out_hashes.insert(key, content_hash(&path)?);
        }
        self.manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                config_hash: self.run.hash.clone(),
                seed: self.run.seed,
                inputs: in_hashes,
                outputs: out_hashes,
            },
        );
        self.manifest.save(&self.out)?;
        Ok(Outcome::Ran)
    }

    fn up_to_date(&self, stage: Stage, in_hashes: &BTreeMap<String, String>) -> Result<bool> {
        let Some(rec) = self.manifest.stages.get(stage.name()) else {
            return Ok(false);
        };
        if rec.config_hash != self.run.hash || &rec.inputs != in_hashes {
            return Ok(false);
        }
        for (key, path) in self.outputs(stage) {
            if !path.exists() || rec.outputs.get(&key) != Some(&content_hash(&path)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Every stage in order. `generate` runs only for the built-in cohort
    /// location.
    pub fn pipeline(&mut self) -> Result<Vec<(Stage, Outcome)>> {
        let mut stages = vec![
            Stage::Label,
            Stage::Features,
            Stage::Train,
            Stage::Simulate,
            Stage::Evaluate,
            Stage::Report,
        ];
        if self.run.cfg.paths.cohort.is_none() {
            stages.insert(0, Stage::Generate);
        }
        stages.into_iter().map(|s| Ok((s, self.run_stage(s)?))).collect()
    }

    fn exec(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Generate => self.generate(),
            Stage::Label => self.label(),
            Stage::Features => self.features(),
            Stage::Train => self.train(),
            Stage::Simulate => self.simulate(),
            Stage::Evaluate => self.evaluate(),
            Stage::Report => self.report(),
        }
    }

    fn load_cohort(&mut self) -> Result<&Cohort> {
        if self.cohort.is_none() {
            let path = self.schema_path();
            let mut schema = SchemaConfig::load(&path).with_context(|| format!("schema {}", path.display()))?;
            if let Some(w) = self.run.cfg.segment_width {
                schema.segment_width = w;
            }
            let (cohort, report) = ingest(&self.cohort_dir(), &schema)?;
            log::info!(
                "ingested {} participants, {} sensor rows",
                cohort.participants.len(),
                report.total_sensor_rows()
            );
            self.cohort = Some(cohort);
        }
        Ok(self.cohort.as_ref().unwrap())
    }

    fn load_matrix(&self) -> Result<FeatureMatrix> {
        Ok(FeatureMatrix::read_csv(&self.path(FEATURES))?)
    }

    fn load_labels(&self) -> Result<Vec<LabelRow>> {
        Ok(read_labels(&self.path(LABELS))?)
    }

    fn load_models(&self) -> Result<TrainedCv> {
        let env = read_json::<TrainedCv>(&self.path(MODELS), MODELS_SCHEMA)?;
        self.check_hash(MODELS, &env.config_hash)?;
        Ok(env.data)
    }

    fn load_simulation(&self) -> Result<SimulationResult> {
        let env = read_json::<SimulationResult>(&self.path(SIMULATION), SIMULATION_SCHEMA)?;
        self.check_hash(SIMULATION, &env.config_hash)?;
        Ok(env.data)
    }

    fn check_hash(&self, name: &str, found: &str) -> Result<()> {
        if found != self.run.hash {
            bail!("`{name}` was produced with a different config; rerun the stage that writes it");
        }
        Ok(())
    }

    fn generate(&mut self) -> Result<()> {
        let dir = self.cohort_dir();
        let parent = dir.parent().unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let tmp = tempfile::Builder::new().prefix(".cohort-").tempdir_in(parent)?;
        generate_cohort(&self.run.cfg.cohort, tmp.path())?;
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("replacing {}", dir.display()))?;
        }
        let staged = tmp.keep();
        fs::rename(&staged, &dir).with_context(|| format!("moving cohort into {}", dir.display()))?;
        self.cohort = None;
        log::info!(
            "generated {} participants x {} days in {}",
            self.run.cfg.cohort.participants,
            self.run.cfg.cohort.days,
            dir.display()
        );
        Ok(())
    }

    fn label(&mut self) -> Result<()> {
        let cohort = self.load_cohort()?;
        let mut segments = Vec::new();
        for p in &cohort.participants {
            segments.extend(segment_windows(p, cohort.schema.segment_width)?);
        }
        let labels = label_cohort(cohort, &segments);
        let mut buf = Vec::new();
        write_labels(&labels, &mut buf)?;
        write_atomic(&self.path(LABELS), &buf)
    }

    fn features(&mut self) -> Result<()> {
        let cfg = self.run.cfg.features.clone();
        let cohort = self.load_cohort()?;
        let (_, matrix) = extract_cohort(cohort, &cfg)?;
        let mut buf = Vec::new();
        matrix.write_csv(&mut buf)?;
        write_atomic(&self.path(FEATURES), &buf)
    }

    fn train(&mut self) -> Result<()> {
        let matrix = self.load_matrix()?;
        let labels = self.load_labels()?;
        let table = training_table(&matrix, &labels);
        if table.rows.is_empty() {
            bail!("no labeled segment has features");
        }
        let x = normalize_matrix(&matrix)?;
        let trained = train_cv(&table, &x, &matrix.registry_hash(), &self.run.eval())?;
        write_json(&self.path(MODELS), MODELS_SCHEMA, &self.run.hash, self.run.seed, &trained)
    }

    fn simulate(&mut self) -> Result<()> {
        let matrix = self.load_matrix()?;
        let trained = self.load_models()?;
        let x = normalize_matrix(&matrix)?;
        let outcome = self.run.cfg.outcome;
        let truth = if outcome == OutcomeSource::GenerativeTruth {
            Some(cohort_truth(&self.cohort_dir()).context("generative_truth outcomes need a generated cohort")?)
        } else {
            None
        };
        let trigger = self.run.cfg.trigger.clone();
        let eval = self.run.eval();
        let cohort = self.load_cohort()?;
        let slots = scheduling_windows(&matrix, cohort, &trigger);
        let windows = score_windows(&slots, &trained, &x, &eval, truth.as_ref())?;
        let sim = simulate_triggers(&windows, &trigger, outcome, self.run.seed)?;
        write_atomic(&self.path(CANDIDATES), &write_candidates(&windows, &trigger)?)?;
        let mut buf = Vec::new();
        write_summary_csv(&sim, &mut buf)?;
        write_atomic(&self.path(SIMULATION_SUMMARY), &buf)?;
        write_json(&self.path(SIMULATION), SIMULATION_SCHEMA, &self.run.hash, self.run.seed, &sim)
    }

    fn evaluate(&mut self) -> Result<()> {
        let matrix = self.load_matrix()?;
        let labels = self.load_labels()?;
        let trained = self.load_models()?;
        let sim = self.load_simulation()?;
        let windows = read_candidates(&self.path(CANDIDATES))?;
        let table = training_table(&matrix, &labels);
        let x = normalize_matrix(&matrix)?;
        let predictions = test_predictions(&table, &x, &trained, &self.run.eval())?;
        let metrics = model_metrics(&predictions);
        let trigger = self.run.cfg.trigger.clone();
        let cohort = self.load_cohort()?;
        let prompts = prompt_records(cohort, &windows, &trigger)?;
        let stats = Stats {
            rq1: rq1(&prompts),
            rq2: rq2(&prompts, cohort.schema.pa_scale),
            rq3: (!sim.decisions.is_empty()).then(|| rq3(&sim)),
        };
        write_atomic(&self.path(CURVE), &write_curve(&stats.rq2)?)?;
        write_json(&self.path(METRICS), METRICS_SCHEMA, &self.run.hash, self.run.seed, &metrics)?;
        write_json(&self.path(STATS), STATS_SCHEMA, &self.run.hash, self.run.seed, &stats)
    }

    fn report(&mut self) -> Result<()> {
        let bundle = build_report(&self.out, &self.manifest, &self.run.cfg.report.title)?;
        for s in &bundle.missing {
            log::warn!("report: section `{s}` missing");
        }
        let dir = self.path(REPORT_DIR);
        if dir.exists() {
            // Drop tables whose sources disappeared.
            for entry in fs::read_dir(&dir)? {
                let p = entry?.path();
                let keep = p.file_name().and_then(|n| n.to_str()).is_some_and(|n| bundle.files.contains_key(n));
                if p.is_file() && !keep {
                    fs::remove_file(&p)?;
                }
            }
        }
        for (name, bytes) in &bundle.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        Ok(())
    }
}
