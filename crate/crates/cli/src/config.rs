//! The run configuration: one TOML file, overridable per flag.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smartema::eval::{EvalConfig, RunOptions};
use smartema::features::FeatureConfig;
use smartema::models::{MlpSpec, MC_PASSES};
use smartema::stats::CvMode;
use smartema::synth::CohortSpec;
use smartema::trigger::{OutcomeSource, TriggerConfig};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "SMARTEMA_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Existing cohort directory. Unset: the generated cohort in
    /// `<out>/cohort`. Relative paths resolve against the output directory.
    pub cohort: Option<PathBuf>,
    /// Schema file. Unset: `schema.toml` inside the cohort directory.
    pub schema: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportOptions {
    pub title: String,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            title: "Smart trigger evaluation".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Required, here or through `--seed`.
    pub seed: Option<u64>,
    /// Overrides the schema's segment width (minutes).
    pub segment_width: Option<u32>,
    pub mc_passes: usize,
    pub outcome: OutcomeSource,
    pub cv: CvMode,
    pub paths: Paths,
    /// Synthetic cohort for `generate`; its seed is the run seed.
    pub cohort: CohortSpec,
    pub features: FeatureConfig,
    pub receptivity: MlpSpec,
    pub emotion: MlpSpec,
    pub trigger: TriggerConfig,
    pub report: ReportOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvalConfig::default();
        RunConfig {
            seed: None,
            segment_width: None,
            mc_passes: MC_PASSES,
            outcome: OutcomeSource::default(),
            cv: eval.cv,
            paths: Paths::default(),
            cohort: CohortSpec::default(),
            features: FeatureConfig::default(),
            receptivity: eval.receptivity,
            emotion: eval.emotion,
            trigger: TriggerConfig::default(),
            report: ReportOptions::default(),
        }
    }
}

/// Per-flag overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub w_u: Option<f64>,
    pub w_r: Option<f64>,
    pub windows: Option<u32>,
    pub outcome: Option<OutcomeSource>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| anyhow!("config: {e}"))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow!("config field `{path}`: {}", e.into_inner().message().trim())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Applies overrides, fills the cohort seed and validates.
    pub fn resolve(mut self, o: &Overrides) -> Result<Resolved> {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        let Some(seed) = self.seed else {
            bail!("config field `seed` is required (set it in the config or pass --seed)");
        };
        if let Some(w) = o.w_u {
            self.trigger.w_u = w;
        }
        if let Some(w) = o.w_r {
            self.trigger.w_r = w;
        }
        if let Some(n) = o.windows {
            self.trigger.windows = n;
        }
        if let Some(src) = o.outcome {
            self.outcome = src;
        }
        self.cohort.seed = seed;
        self.validate()?;
        let hash = hex::encode(Sha256::digest(self.to_toml().as_bytes()));
        Ok(Resolved { seed, hash, cfg: self })
    }

    fn validate(&self) -> Result<()> {
        let field = |prefix: &str, e: smartema::Error| match e {
            smartema::Error::Config { field, message } => anyhow!("config field `{prefix}{field}`: {message}"),
            other => anyhow!("config `{prefix}`: {other}"),
        };
        self.cohort.validate().map_err(|e| field("cohort.", e))?;
        self.trigger.validate().map_err(|e| field("", e))?;
        self.receptivity.validate().map_err(|e| field("receptivity.", e))?;
        self.emotion.validate().map_err(|e| field("emotion.", e))?;
        if self.mc_passes < 2 {
            bail!("config field `mc_passes`: need at least 2 passes");
        }
        if let CvMode::GroupKFold { k } = self.cv {
            if k < 2 {
                bail!("config field `cv.k`: need at least 2 folds");
            }
        }
        Ok(())
    }
}

/// A validated config with its seed and hash.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub seed: u64,
    /// Hex SHA-256 of the effective config; stamped on every artifact.
    pub hash: String,
    pub cfg: RunConfig,
}

impl Resolved {
    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            cv: self.cfg.cv,
            receptivity: self.cfg.receptivity.clone(),
            emotion: self.cfg.emotion.clone(),
            mc_passes: self.cfg.mc_passes,
            seed: self.seed,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            features: self.cfg.features.clone(),
            eval: self.eval(),
            trigger: self.cfg.trigger.clone(),
            outcome: self.cfg.outcome,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let mut c = RunConfig::default();
        c.seed = Some(3);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn seed_is_required() {
        let err = RunConfig::default().resolve(&Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
        let r = RunConfig::default()
            .resolve(&Overrides {
                seed: Some(9),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!(r.cfg.cohort.seed, 9);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = RunConfig::from_toml("seed = 1\n[trigger]\nw_u = \"high\"\n").unwrap_err();
        assert!(err.to_string().contains("trigger.w_u"), "{err}");
        let err = RunConfig::from_toml("seed = 1\n[cohort]\nparticipantz = 3\n").unwrap_err();
        assert!(err.to_string().contains("cohort"), "{err}");
        let err = RunConfig::from_toml("seed = 1\n[trigger]\nw_u = -1.0\n")
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap_err();
        assert!(err.to_string().contains("trigger.w_u"), "{err}");
    }

    #[test]
    fn overrides_change_the_hash() {
        let base = RunConfig {
            seed: Some(1),
            ..RunConfig::default()
        };
        let a = base.clone().resolve(&Overrides::default()).unwrap();
        let b = base
            .resolve(&Overrides {
                w_u: Some(0.0),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!(b.cfg.trigger.w_u, 0.0);
        assert_ne!(a.hash, b.hash);
    }
}
