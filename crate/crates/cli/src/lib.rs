//! Stage runner, artifact formats and report builder behind the `smartema`
//! binary.

pub mod artifacts;
pub mod candidates;
pub mod config;
pub mod report;
pub mod stages;
pub mod store;

pub use config::{Overrides, Resolved, RunConfig};
pub use stages::{Outcome, Runner, Stage};
