//! Uncertainty-aware scheduling of ecological momentary assessments (EMA).
//!
//! The crate covers the offline pipeline end to end: ingest participant
//! sensor/EMA files, label fixed-width segments for receptivity and positive
//! affect, extract wearable and phone features, train a receptivity
//! classifier and an MC-dropout emotion regressor, score candidate prompt
//! times with `J = w_u U² + w_r R²`, simulate smart vs random triggers, and
//! run the statistical comparisons. A synthetic cohort generator with planted
//! ground truth is included for testing.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod labeling;
pub mod models;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod trigger;

pub use data::{Cohort, EmaEvent, ParticipantDataset, SchemaConfig, Segment, Timestamp};
pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use labeling::{LabeledSegment, ReceptivityLabel};
pub use models::{MlpSpec, ModelOutput, TrainedModel};
pub use trigger::{TriggerConfig, TriggerDecision};
