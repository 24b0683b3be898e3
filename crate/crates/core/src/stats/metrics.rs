use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub weighted_precision: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    /// Masked when the truth is constant.
    pub r2: Option<f64>,
}

/// Support-weighted precision and F1 plus accuracy. A class never predicted
/// has precision 0.
pub fn classification_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<ClassificationMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("labels".into()));
    }
    let n = y_true.len() as f64;
    let mut classes: Vec<f64> = y_true.iter().chain(y_pred).copied().collect();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let correct = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count() as f64;
    let (mut f1, mut precision) = (0.0, 0.0);
    for c in classes {
        let support = y_true.iter().filter(|v| **v == c).count() as f64;
        if support == 0.0 {
            continue;
        }
        let predicted = y_pred.iter().filter(|v| **v == c).count() as f64;
        let tp = y_true.iter().zip(y_pred).filter(|(a, b)| **a == c && **b == c).count() as f64;
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = tp / support;
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        f1 += support / n * f;
        precision += support / n * p;
    }
    Ok(ClassificationMetrics {
        accuracy: correct / n,
        weighted_f1: f1,
        weighted_precision: precision,
    })
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(Error::Empty("need at least two observations".into()));
    }
    let n = y_true.len() as f64;
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|a| (a - mean).powi(2)).sum();
    Ok(RegressionMetrics {
        rmse: (ss_res / n).sqrt(),
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    })
}

/// Mean and sample standard deviation of per-participant values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanSd { mean, sd, n })
    }
}
