//! Receptivity classifier, MC-dropout emotion regressor and baselines.
//!
//! Models consume dense, already normalized feature rows. Each trained model
//! records the hash of the feature registry it was trained on and refuses
//! rows from a different registry.

pub mod baselines;
pub mod mlp;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baselines::{BernoulliBaseline, GaussianBaseline, GaussianNb, OlsModel};
pub use mlp::{Activation, LossKind, MlpSpec, Network};

/// Default number of stochastic passes for emotion uncertainty.
pub const MC_PASSES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    /// Response probability R(t).
    pub r_prob: f64,
    /// Predicted PA on the questionnaire scale.
    pub emo_mean: f64,
    /// Predictive variance across dropout passes, PA units squared.
    pub emo_var: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: MlpSpec,
    pub registry_hash: String,
    pub network: Network,
    /// Targets are standardized for regression; identity for classification.
    pub target_mean: f64,
    pub target_sd: f64,
    pub training_log: Vec<f64>,
}

const MODEL_FORMAT: &str = "smartema-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

fn check_rows(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Empty("training set".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(x.nrows(), y.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite feature value".into()));
    }
    Ok(())
}

/// Trains the classifier on 0/1 labels.
pub fn train_receptivity(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &MlpSpec,
    registry_hash: &str,
) -> Result<TrainedModel> {
    spec.validate()?;
    check_rows(x, y)?;
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::Validation("receptivity labels must be 0 or 1".into()));
    }
    let positives = y.iter().filter(|v| **v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateLabels(format!(
            "{positives} of {} examples are positive",
            y.len()
        )));
    }
    let (network, training_log) = mlp::fit(spec, x, y);
    Ok(TrainedModel {
        spec: spec.clone(),
        registry_hash: registry_hash.to_string(),
        network,
        target_mean: 0.0,
        target_sd: 1.0,
        training_log,
    })
}

/// Trains the regressor on PA scores, standardized internally.
pub fn train_emotion(
    x: ArrayView2<f64>,
    pa: ArrayView1<f64>,
    spec: &MlpSpec,
    registry_hash: &str,
) -> Result<TrainedModel> {
    spec.validate()?;
    check_rows(x, pa)?;
    let mean = pa.mean().unwrap();
    let sd = pa.std(0.0);
    if !(sd > 0.0) {
        return Err(Error::ZeroVarianceTarget);
    }
    let z: Array1<f64> = pa.mapv(|v| (v - mean) / sd);
    let (network, training_log) = mlp::fit(spec, x, z.view());
    Ok(TrainedModel {
        spec: spec.clone(),
        registry_hash: registry_hash.to_string(),
        network,
        target_mean: mean,
        target_sd: sd,
        training_log,
    })
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.network.inputs()
    }

    pub fn check_input(&self, registry_hash: &str, cols: usize) -> Result<()> {
        if registry_hash != self.registry_hash {
            return Err(Error::RegistryMismatch {
                expected: self.registry_hash.clone(),
                actual: registry_hash.to_string(),
            });
        }
        if cols != self.n_features() {
            return Err(Error::FeatureCount {
                expected: self.n_features(),
                actual: cols,
            });
        }
        Ok(())
    }

    /// Deterministic prediction on the target scale.
    pub fn predict(&self, registry_hash: &str, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_input(registry_hash, x.ncols())?;
        let out = self.network.predict(&self.spec, x);
        Ok(out.mapv(|v| v * self.target_sd + self.target_mean))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported {} v{}",
                file.format, file.version
            )));
        }
        let m = file.model;
        m.spec.validate()?;
        if m.network.layers.iter().any(|l| l.w.iter().chain(&l.b).any(|v| !v.is_finite())) {
            return Err(Error::ModelFormat("non-finite weight".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn predict_receptivity(model: &TrainedModel, registry_hash: &str, row: &[f64]) -> Result<f64> {
    let x = Array2::from_shape_vec((1, row.len()), row.to_vec()).expect("one row");
    Ok(model.predict(registry_hash, x.view())?[0])
}

/// Mean and variance of `passes` dropout-on predictions for each row, on
/// the PA scale. Rows do not influence each other.
pub fn mc_dropout_batch(
    model: &TrainedModel,
    registry_hash: &str,
    x: ArrayView2<f64>,
    passes: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    model.check_input(registry_hash, x.ncols())?;
    if passes == 0 {
        return Err(Error::Validation("need at least one pass".into()));
    }
    let (mean, var) = mlp::mc_dropout(&model.network, &model.spec, x, passes, seed);
    let sd = model.target_sd;
    Ok(mean
        .iter()
        .zip(&var)
        .map(|(m, v)| (m * sd + model.target_mean, v * sd * sd))
        .collect())
}

pub fn mc_dropout_predict(
    model: &TrainedModel,
    registry_hash: &str,
    row: &[f64],
    passes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let x = Array2::from_shape_vec((1, row.len()), row.to_vec()).expect("one row");
    Ok(mc_dropout_batch(model, registry_hash, x.view(), passes, seed)?[0])
}
