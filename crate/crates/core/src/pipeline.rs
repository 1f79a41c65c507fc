//! Per-trial orchestration: manifest and streams in, one cohort table row
//! plus diagnostics and audit entries out.
//!
//! Exclusions are data, not failures: a missing or empty stream produces an
//! excluded row, while malformed content and inconsistent overrides are hard
//! errors that surface the offending file and line.

use std::path::Path;

use thiserror::Error;

use crate::config::RunConfig;
use crate::events::{
    apply_overrides, derive_events, EventError, Exclusion, Override, TrialEvents,
};
use crate::ingest::{
    align, parse_detections, parse_gaze, parse_telemetry, Detection, GazeSample, IngestError,
    SyncedTrial, TelemetrySample, TrialManifest,
};
use crate::metrics::{
    igd_at_onset, sensing_time, telemetry_at_onset, time_to_collision, LOW_ST_WARN_MS,
    SPEED_EPS_KMH,
};
use crate::table::{AuditRecord, TableError, TrialRecord, TrialStatus};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("trial {trial_id}: overrides leave no usable events: {msg}")]
    InconsistentOverride { trial_id: String, msg: String },
}

/// Everything one trial run produces.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub events: TrialEvents,
    pub diagnostics: Vec<String>,
    pub audit: Vec<AuditRecord>,
}

/// Runs a trial from its manifest file. Absent or empty stream files map to
/// a MissingData exclusion; malformed files are errors.
pub fn run_trial_files(
    manifest_path: &Path,
    overrides: &[Override],
    cfg: &RunConfig,
) -> Result<TrialOutcome, PipelineError> {
    let manifest = crate::ingest::parse_manifest(manifest_path)?;
    let gaze = match parse_gaze(&manifest.gaze_path) {
        Ok(g) => g,
        Err(e) if e.is_missing_file() => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let detections = match parse_detections(&manifest.detections_path, &manifest) {
        Ok(d) => d,
        Err(e) if e.is_missing_file() => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let (telemetry, warnings) = match parse_telemetry(&manifest.telemetry_path) {
        Ok(t) => t,
        Err(e) if e.is_missing_file() => (Vec::new(), Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut outcome = run_trial_streams(&manifest, &gaze, &detections, &telemetry, overrides, cfg)?;
    for w in warnings {
        outcome.audit.push(AuditRecord {
            trial_id: manifest.trial_id.clone(),
            kind: "warning".into(),
            detail: w.clone(),
        });
        outcome.diagnostics.push(w);
    }
    Ok(outcome)
}

/// Runs a trial on already-parsed streams.
pub fn run_trial_streams(
    manifest: &TrialManifest,
    gaze: &[GazeSample],
    detections: &[Detection],
    telemetry: &[TelemetrySample],
    overrides: &[Override],
    cfg: &RunConfig,
) -> Result<TrialOutcome, PipelineError> {
    let synced = match align(manifest, gaze, detections, telemetry, cfg.max_gap_ms) {
        Ok(s) => s,
        Err(IngestError::EmptyStream { stream }) => {
            let events = TrialEvents {
                t1_ms: None,
                t2_ms: None,
                anticipatory: false,
                exclusion: Some(Exclusion::MissingData),
            };
            let (events, audit) = overridden(&events, manifest, overrides)?;
            let mut outcome = finish(manifest, None, telemetry, events, cfg)?;
            outcome.diagnostics.push(format!("{stream} stream is missing or empty"));
            outcome.audit.extend(audit);
            return Ok(outcome);
        }
        Err(e) => return Err(e.into()),
    };
    let events = derive_events(&synced, &cfg.event_config());
    let (events, audit) = overridden(&events, manifest, overrides)?;
    let mut outcome = finish(manifest, Some(&synced), telemetry, events, cfg)?;
    outcome.audit.extend(audit);
    Ok(outcome)
}

fn overridden(
    events: &TrialEvents,
    manifest: &TrialManifest,
    overrides: &[Override],
) -> Result<(TrialEvents, Vec<AuditRecord>), EventError> {
    let (events, applied) = apply_overrides(events, &manifest.trial_id, overrides)?;
    let audit = applied
        .into_iter()
        .map(|a| AuditRecord {
            trial_id: a.trial_id,
            kind: "override".into(),
            detail: format!("{}: {} -> {} ({})", a.field, a.old, a.new, a.reason),
        })
        .collect();
    Ok((events, audit))
}

fn finish(
    manifest: &TrialManifest,
    synced: Option<&SyncedTrial>,
    telemetry: &[TelemetrySample],
    events: TrialEvents,
    cfg: &RunConfig,
) -> Result<TrialOutcome, PipelineError> {
    let mut diagnostics = Vec::new();
    let mut audit = Vec::new();
    let mut record = TrialRecord {
        trial_id: manifest.trial_id.clone(),
        subject_id: manifest.subject_id.clone(),
        group: manifest.group,
        st_ms: None,
        speed_kmh: None,
        igd_px: None,
        ttc_s: None,
        status: TrialStatus::Valid,
        crash: manifest.crash_flag,
    };

    if let Some(code) = events.exclusion {
        record.status = TrialStatus::Excluded(code);
        if code == Exclusion::Anticipatory {
            record.st_ms = Some(0);
        }
        diagnostics.push(format!("excluded: {code}"));
        return Ok(TrialOutcome { record, events, diagnostics, audit });
    }

    let (Some(t1), Some(t2)) = (events.t1_ms, events.t2_ms) else {
        return Err(PipelineError::InconsistentOverride {
            trial_id: manifest.trial_id.clone(),
            msg: "trial is not excluded but t1/t2 are not both set".into(),
        });
    };
    let st = sensing_time(t1, t2).map_err(|e| PipelineError::InconsistentOverride {
        trial_id: manifest.trial_id.clone(),
        msg: e.to_string(),
    })?;
    record.st_ms = Some(st);
    if st < LOW_ST_WARN_MS {
        let note = format!("sensing time {st} ms is below one saccade duration; kept");
        audit.push(AuditRecord {
            trial_id: manifest.trial_id.clone(),
            kind: "flag".into(),
            detail: note.clone(),
        });
        diagnostics.push(note);
    }

    if let Some(synced) = synced {
        match igd_at_onset(synced, t1, cfg.conf_min) {
            Ok(igd) => record.igd_px = Some(igd),
            Err(e) => diagnostics.push(format!("IGD unavailable: {e}")),
        }
    }
    match telemetry_at_onset(telemetry, t1) {
        Ok(sample) => {
            record.speed_kmh = Some(sample.speed_kmh);
            match time_to_collision(sample.dist_m, sample.speed_kmh, SPEED_EPS_KMH) {
                Ok(ttc) => record.ttc_s = Some(ttc),
                Err(e) => diagnostics.push(format!("TTC unavailable: {e}")),
            }
        }
        Err(e) => diagnostics.push(format!("speed unavailable: {e}")),
    }
    Ok(TrialOutcome { record, events, diagnostics, audit })
}

/// Convenience for synthetic data: run the pipeline on an in-memory trial.
pub fn run_synth_trial(
    trial: &crate::synth::SynthTrial,
    cfg: &RunConfig,
) -> Result<TrialOutcome, PipelineError> {
    run_trial_streams(
        &trial.manifest,
        &trial.gaze,
        &trial.detections,
        &trial.telemetry,
        &[],
        cfg,
    )
}
