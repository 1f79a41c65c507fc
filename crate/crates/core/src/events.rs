//! Event detection on an aligned trial: hazard onset t1 (first debounced run
//! of target detections), gaze hit t2 (first valid gaze inside a target box
//! at or after t1), the exclusion taxonomy, and manual overrides.

use std::path::Path;

use thiserror::Error;

use crate::ingest::{Detection, SyncedTrial};

#[derive(Debug, Error)]
pub enum EventError {
    #[error("no qualifying hazard detection run")]
    NoHazardDetected,
    #[error("gaze never entered a target box before scenario end")]
    NeverLooked,
    #[error("unknown override field `{0}` (expected t1_ms, t2_ms, or exclusion)")]
    UnknownField(String),
    #[error("bad override value `{value}` for {field}: {msg}")]
    BadValue {
        field: String,
        value: String,
        msg: String,
    },
    #[error("override breaks event invariants: {0}")]
    InvariantViolation(String),
    #[error("{path}:{line}: malformed override row: {msg}")]
    MalformedOverride {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Why a trial contributes no sensing time to the cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exclusion {
    TiltedGlasses,
    MissingData,
    Anticipatory,
    AlteredPositioning,
    GazeLossOrFrozen,
    RecordingPause,
    NeverLooked,
}

impl Exclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Exclusion::TiltedGlasses => "TiltedGlasses",
            Exclusion::MissingData => "MissingData",
            Exclusion::Anticipatory => "Anticipatory",
            Exclusion::AlteredPositioning => "AlteredPositioning",
            Exclusion::GazeLossOrFrozen => "GazeLossOrFrozen",
            Exclusion::RecordingPause => "RecordingPause",
            Exclusion::NeverLooked => "NeverLooked",
        }
    }

    pub fn parse(s: &str) -> Option<Exclusion> {
        match s {
            "TiltedGlasses" => Some(Exclusion::TiltedGlasses),
            "MissingData" => Some(Exclusion::MissingData),
            "Anticipatory" => Some(Exclusion::Anticipatory),
            "AlteredPositioning" => Some(Exclusion::AlteredPositioning),
            "GazeLossOrFrozen" => Some(Exclusion::GazeLossOrFrozen),
            "RecordingPause" => Some(Exclusion::RecordingPause),
            "NeverLooked" => Some(Exclusion::NeverLooked),
            _ => None,
        }
    }
}

impl std::fmt::Display for Exclusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Detected (or overridden) event times for one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialEvents {
    pub t1_ms: Option<i64>,
    pub t2_ms: Option<i64>,
    pub anticipatory: bool,
    pub exclusion: Option<Exclusion>,
}

impl TrialEvents {
    fn excluded(exclusion: Exclusion) -> Self {
        TrialEvents {
            t1_ms: None,
            t2_ms: None,
            anticipatory: false,
            exclusion: Some(exclusion),
        }
    }
}

/// Knobs for event detection.
#[derive(Debug, Clone, Copy)]
pub struct EventConfig {
    pub debounce_frames: usize,
    pub conf_min: f64,
    pub gaze_radius_px: f64,
}

impl Default for EventConfig {
    fn default() -> Self {
        EventConfig {
            debounce_frames: 2,
            conf_min: 0.25,
            gaze_radius_px: 0.0,
        }
    }
}

fn is_target(d: &Detection, trial: &SyncedTrial, conf_min: f64) -> bool {
    d.conf >= conf_min && trial.manifest.target_labels.contains(&d.label)
}

/// First frame that starts a run of at least `debounce_frames` consecutive
/// frames each holding a qualifying target detection.
pub fn detect_hazard_onset(
    trial: &SyncedTrial,
    debounce_frames: usize,
    conf_min: f64,
) -> Result<i64, EventError> {
    let debounce = debounce_frames.max(1);
    let mut run_start = 0usize;
    let mut run_len = 0usize;
    for (f, slot) in trial.frames.iter().enumerate() {
        if slot.detections.iter().any(|d| is_target(d, trial, conf_min)) {
            if run_len == 0 {
                run_start = f;
            }
            run_len += 1;
            if run_len >= debounce {
                return Ok(trial.frames[run_start].t_ms);
            }
        } else {
            run_len = 0;
        }
    }
    Err(EventError::NoHazardDetected)
}

/// First frame at or after t1 whose valid gaze point falls inside the union
/// of that frame's target boxes, each dilated by `gaze_radius_px`
/// (boundary-inclusive). The hit is anticipatory when it lands on the t1
/// frame itself.
pub fn detect_gaze_hit(
    trial: &SyncedTrial,
    t1_ms: i64,
    gaze_radius_px: f64,
    conf_min: f64,
) -> Result<(i64, bool), EventError> {
    let start = trial.frame_at(t1_ms);
    for (f, slot) in trial.frames.iter().enumerate().skip(start) {
        let Some(gaze) = slot.gaze else { continue };
        let hit = slot
            .detections
            .iter()
            .filter(|d| is_target(d, trial, conf_min))
            .any(|d| d.bbox.contains_dilated(gaze, gaze_radius_px));
        if hit {
            return Ok((slot.t_ms, f == start));
        }
    }
    Err(EventError::NeverLooked)
}

/// True when every valid gaze point of the segment is bit-identical — the
/// tracker froze even if some slots dropped out around it.
pub fn detect_frozen_gaze(trial: &SyncedTrial) -> bool {
    let mut first = None;
    for slot in &trial.frames {
        let Some(g) = slot.gaze else { continue };
        match first {
            None => first = Some(g),
            Some(f) if f.bits_eq(g) => {}
            Some(_) => return false,
        }
    }
    first.is_some()
}

/// Runs the full event classification for one aligned trial.
///
/// Order: gaze-quality exclusions first (total loss or frozen gaze), then
/// hazard onset (none -> missing data), then gaze validity at the onset
/// frame, then the hit search (anticipatory hits and never-looked trials are
/// excluded, matching the study taxonomy).
pub fn derive_events(trial: &SyncedTrial, cfg: &EventConfig) -> TrialEvents {
    if trial.frames.iter().all(|s| s.gaze.is_none()) || detect_frozen_gaze(trial) {
        return TrialEvents::excluded(Exclusion::GazeLossOrFrozen);
    }
    let t1 = match detect_hazard_onset(trial, cfg.debounce_frames, cfg.conf_min) {
        Ok(t1) => t1,
        Err(_) => return TrialEvents::excluded(Exclusion::MissingData),
    };
    if trial.frames[trial.frame_at(t1)].gaze.is_none() {
        let mut ev = TrialEvents::excluded(Exclusion::GazeLossOrFrozen);
        ev.t1_ms = Some(t1);
        return ev;
    }
    match detect_gaze_hit(trial, t1, cfg.gaze_radius_px, cfg.conf_min) {
        Ok((t2, true)) => TrialEvents {
            t1_ms: Some(t1),
            t2_ms: Some(t2),
            anticipatory: true,
            exclusion: Some(Exclusion::Anticipatory),
        },
        Ok((t2, false)) => TrialEvents {
            t1_ms: Some(t1),
            t2_ms: Some(t2),
            anticipatory: false,
            exclusion: None,
        },
        Err(_) => {
            let mut ev = TrialEvents::excluded(Exclusion::NeverLooked);
            ev.t1_ms = Some(t1);
            ev
        }
    }
}

/// A manual correction from the overrides file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub trial_id: String,
    pub field: String,
    pub value: String,
    pub reason: String,
}

/// An override that was actually applied, for the audit log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedOverride {
    pub trial_id: String,
    pub field: String,
    pub old: String,
    pub new: String,
    pub reason: String,
}

pub const OVERRIDES_HEADER: &str = "trial_id,field,value,reason";

/// Reads the overrides CSV (`trial_id,field,value,reason`). Reasons are the
/// audit trail and must be non-empty.
pub fn parse_overrides(path: &Path) -> Result<Vec<Override>, EventError> {
    let text = std::fs::read_to_string(path).map_err(|source| EventError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let err = |line: usize, msg: String| EventError::MalformedOverride {
        path: path.display().to_string(),
        line,
        msg,
    };
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == OVERRIDES_HEADER => {}
        Some((_, h)) => return Err(err(1, format!("expected header `{OVERRIDES_HEADER}`, got `{h}`"))),
        None => return Ok(Vec::new()),
    }
    let mut overrides = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        // The reason field may contain commas; split off the first three.
        let mut parts = line.splitn(4, ',');
        let trial_id = parts.next().unwrap_or("").trim();
        let field = parts.next().map(str::trim);
        let value = parts.next().map(str::trim);
        let reason = parts.next().map(str::trim);
        let (Some(field), Some(value), Some(reason)) = (field, value, reason) else {
            return Err(err(line_no, "expected 4 fields".into()));
        };
        if trial_id.is_empty() {
            return Err(err(line_no, "empty trial_id".into()));
        }
        if reason.is_empty() {
            return Err(err(line_no, "override reason must be non-empty".into()));
        }
        overrides.push(Override {
            trial_id: trial_id.to_string(),
            field: field.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        });
    }
    Ok(overrides)
}

fn fmt_opt(v: Option<i64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Applies the overrides that match `trial_id`, in file order, then
/// re-checks the event invariants. Returns the new events and one audit
/// entry per applied override.
pub fn apply_overrides(
    events: &TrialEvents,
    trial_id: &str,
    overrides: &[Override],
) -> Result<(TrialEvents, Vec<AppliedOverride>), EventError> {
    let mut out = events.clone();
    let mut applied = Vec::new();
    for ov in overrides.iter().filter(|o| o.trial_id == trial_id) {
        let bad = |msg: &str| EventError::BadValue {
            field: ov.field.clone(),
            value: ov.value.clone(),
            msg: msg.into(),
        };
        let old;
        let new;
        match ov.field.as_str() {
            "t1_ms" => {
                let v: i64 = ov.value.parse().map_err(|_| bad("expected integer milliseconds"))?;
                old = fmt_opt(out.t1_ms);
                new = v.to_string();
                out.t1_ms = Some(v);
            }
            "t2_ms" => {
                let v: i64 = ov.value.parse().map_err(|_| bad("expected integer milliseconds"))?;
                old = fmt_opt(out.t2_ms);
                new = v.to_string();
                out.t2_ms = Some(v);
            }
            "exclusion" => {
                old = out.exclusion.map_or_else(|| "None".to_string(), |e| e.to_string());
                if ov.value == "None" {
                    out.exclusion = None;
                    new = "None".to_string();
                } else {
                    let code = Exclusion::parse(&ov.value)
                        .ok_or_else(|| bad("not a known exclusion code"))?;
                    out.exclusion = Some(code);
                    new = code.to_string();
                }
            }
            other => return Err(EventError::UnknownField(other.to_string())),
        }
        applied.push(AppliedOverride {
            trial_id: trial_id.to_string(),
            field: ov.field.clone(),
            old,
            new,
            reason: ov.reason.clone(),
        });
    }
    if let (Some(t1), Some(t2)) = (out.t1_ms, out.t2_ms) {
        if out.anticipatory && t2 != t1 {
            return Err(EventError::InvariantViolation(format!(
                "anticipatory trial requires t2 == t1, got t1={t1}, t2={t2}"
            )));
        }
        if t2 < t1 && !out.anticipatory {
            return Err(EventError::InvariantViolation(format!(
                "t2 ({t2}) precedes t1 ({t1}) without an anticipatory flag"
            )));
        }
    }
    Ok((out, applied))
}
