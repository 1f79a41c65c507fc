//! Detector-agnostic hazard-perception analytics.
//!
//! The crate turns synchronized gaze, object-detection, and simulator
//! telemetry streams into per-trial sensing times (hazard onset to first
//! gaze-on-target) with companion metrics (initial gaze distance,
//! time-to-collision, speed at onset), applies the validity and exclusion
//! rules, and runs the cohort statistics battery: Welch's ANOVA, Tukey HSD
//! on the studentized range distribution, a sequential-SS linear model with
//! Shapiro-Wilk residual checks, Pearson correlations, and GUM Type B
//! measurement uncertainty. A seeded scenario generator provides ground
//! truth for end-to-end verification.

pub mod config;
pub mod events;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;
pub mod table;

pub use config::{FilterOrder, RunConfig};
pub use events::{Exclusion, TrialEvents};
pub use ingest::{FitnessGroup, SyncedTrial, TrialManifest};
pub use pipeline::{run_trial_files, run_trial_streams, TrialOutcome};
pub use stats::{run_battery, StatBattery};
pub use table::{TrialRecord, TrialStatus};
