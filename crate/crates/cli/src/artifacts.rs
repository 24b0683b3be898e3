//! Artifact names, JSON schema tags and the curve table.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use smartema::eval::{Rq1, Rq2, Rq3};
use smartema::stats::CurveBin;

pub const COHORT_DIR: &str = "cohort";
pub const LABELS: &str = "labels.csv";
pub const FEATURES: &str = "features.csv";
pub const MODELS: &str = "models.json";
pub const CANDIDATES: &str = "candidates.csv";
pub const SIMULATION: &str = "simulation.json";
pub const SIMULATION_SUMMARY: &str = "simulation_summary.csv";
pub const METRICS: &str = "metrics.json";
pub const STATS: &str = "stats.json";
pub const CURVE: &str = "curve.csv";
pub const REPORT_DIR: &str = "report";

pub const MODELS_SCHEMA: &str = "smartema.models";
pub const SIMULATION_SCHEMA: &str = "smartema.simulation";
pub const METRICS_SCHEMA: &str = "smartema.metrics";
pub const STATS_SCHEMA: &str = "smartema.stats";

/// Contents of `stats.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub rq1: Rq1,
    pub rq2: Rq2,
    /// Absent when the simulation made no decisions.
    pub rq3: Option<Rq3>,
}

pub const CURVE_HEADER: [&str; 5] = ["curve", "lo", "hi", "count", "mean_j"];

/// `curve.csv`: mean J per PA bin (`pa`) and per within-participant z bin
/// (`z`). `mean_j` is empty for bins without prompts.
pub fn write_curve(rq2: &Rq2) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(CURVE_HEADER)?;
    let curves: [(&str, &[CurveBin]); 2] = [("pa", &rq2.pa_curve), ("z", &rq2.z_curve)];
    for (name, bins) in curves {
        for b in bins {
            out.write_record([
                name.to_string(),
                b.lo.to_string(),
                b.hi.to_string(),
                b.count.to_string(),
                b.mean_j.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    Ok(out.into_inner()?)
}
