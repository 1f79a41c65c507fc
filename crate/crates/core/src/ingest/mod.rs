//! Raw stream ingestion: parsing the per-trial gaze, detection, and
//! telemetry files and aligning them on the video frame grid.

mod parse;

pub use parse::{
    parse_detections, parse_gaze, parse_manifest, parse_telemetry, write_detections, write_gaze,
    write_manifest, write_telemetry,
};

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}:{line}: malformed row: {msg}")]
    MalformedRow {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: timestamps must be strictly increasing")]
    NonMonotonicTime { path: String, line: usize },
    #[error("{path}:{line}: malformed record: {msg}")]
    MalformedRecord {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: bounding box outside the {width}x{height} frame")]
    BBoxOutOfFrame {
        path: String,
        line: usize,
        width: u32,
        height: u32,
    },
    #[error("{path}:{line}: degenerate bounding box")]
    DegenerateBBox { path: String, line: usize },
    #[error("{stream} stream is empty")]
    EmptyStream { stream: &'static str },
    #[error("manifest {path}: {msg}")]
    Manifest { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    /// True when the failure is an absent input file rather than bad content.
    pub fn is_missing_file(&self) -> bool {
        matches!(self, IngestError::Io { source, .. }
            if source.kind() == std::io::ErrorKind::NotFound)
    }
}

/// Fitness-to-drive classification, ordered by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FitnessGroup {
    CondFit,
    Fit,
    Unfit,
}

impl FitnessGroup {
    pub const ALL: [FitnessGroup; 3] = [FitnessGroup::CondFit, FitnessGroup::Fit, FitnessGroup::Unfit];

    pub fn as_str(self) -> &'static str {
        match self {
            FitnessGroup::CondFit => "cond_fit",
            FitnessGroup::Fit => "fit",
            FitnessGroup::Unfit => "unfit",
        }
    }

    pub fn parse(s: &str) -> Option<FitnessGroup> {
        match s {
            "cond_fit" => Some(FitnessGroup::CondFit),
            "fit" => Some(FitnessGroup::Fit),
            "unfit" => Some(FitnessGroup::Unfit),
            _ => None,
        }
    }
}

impl fmt::Display for FitnessGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One eye-tracker sample in video pixel coordinates (origin top-left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: i64,
    pub x_px: f64,
    pub y_px: f64,
    pub valid: bool,
}

/// A gaze location on the frame grid after alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazePoint {
    pub x_px: f64,
    pub y_px: f64,
}

impl GazePoint {
    pub fn bits_eq(self, other: GazePoint) -> bool {
        self.x_px.to_bits() == other.x_px.to_bits() && self.y_px.to_bits() == other.y_px.to_bits()
    }
}

/// Axis-aligned detector box, pixels, x_min < x_max and y_min < y_max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn is_degenerate(&self) -> bool {
        self.x_min >= self.x_max || self.y_min >= self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    /// Boundary-inclusive point test after growing every side by `radius`.
    pub fn contains_dilated(&self, p: GazePoint, radius: f64) -> bool {
        p.x_px >= self.x_min - radius
            && p.x_px <= self.x_max + radius
            && p.y_px >= self.y_min - radius
            && p.y_px <= self.y_max + radius
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }
}

/// One detector output record.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_idx: usize,
    pub t_ms: i64,
    pub label: String,
    pub conf: f64,
    pub bbox: BBox,
}

/// Simulator state sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetrySample {
    pub t_ms: i64,
    pub speed_kmh: f64,
    pub dist_m: f64,
}

/// Everything needed to locate and interpret one trial's streams.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialManifest {
    pub trial_id: String,
    pub subject_id: String,
    pub group: FitnessGroup,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub target_labels: BTreeSet<String>,
    pub gaze_path: PathBuf,
    pub detections_path: PathBuf,
    pub telemetry_path: PathBuf,
    pub crash_flag: bool,
}

impl TrialManifest {
    pub fn period_ms(&self) -> f64 {
        1000.0 / self.fps
    }

    /// Timestamp of frame `f`, rounded to integer milliseconds.
    pub fn slot_time(&self, f: usize) -> i64 {
        (f as f64 * 1000.0 / self.fps).round() as i64
    }
}

/// One frame slot of the aligned trial.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSlot {
    pub t_ms: i64,
    /// Valid gaze location, possibly held forward over a short dropout.
    pub gaze: Option<GazePoint>,
    pub detections: Vec<Detection>,
    pub telemetry: Option<TelemetrySample>,
}

/// The three per-trial streams resampled onto the frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncedTrial {
    pub manifest: TrialManifest,
    pub period_ms: f64,
    pub frames: Vec<FrameSlot>,
}

impl SyncedTrial {
    /// Index of the frame slot nearest to `t_ms`, clamped to the trial.
    pub fn frame_at(&self, t_ms: i64) -> usize {
        let idx = (t_ms as f64 / self.period_ms).round();
        (idx.max(0.0) as usize).min(self.frames.len().saturating_sub(1))
    }
}

/// Aligns the parsed streams onto one slot per frame index.
///
/// Gaze and telemetry use nearest-neighbor matching within half a frame
/// period (earlier sample wins a tie). A gaze slot with no valid match holds
/// the last valid sample forward when the gap from that sample is at most
/// `max_gap_ms`; otherwise the slot is invalid.
pub fn align(
    manifest: &TrialManifest,
    gaze: &[GazeSample],
    detections: &[Detection],
    telemetry: &[TelemetrySample],
    max_gap_ms: i64,
) -> Result<SyncedTrial, IngestError> {
    if gaze.is_empty() {
        return Err(IngestError::EmptyStream { stream: "gaze" });
    }
    if detections.is_empty() {
        return Err(IngestError::EmptyStream { stream: "detections" });
    }
    if telemetry.is_empty() {
        return Err(IngestError::EmptyStream { stream: "telemetry" });
    }
    let period = manifest.period_ms();
    let half = period / 2.0;
    let covers = |t: i64| (t as f64 / period).floor() as usize + 1;
    let n_frames = (detections.iter().map(|d| d.frame_idx + 1).max().unwrap())
        .max(covers(gaze.last().unwrap().t_ms))
        .max(covers(telemetry.last().unwrap().t_ms));

    let mut frames = Vec::with_capacity(n_frames);
    let mut gi = 0usize;
    let mut ti = 0usize;
    let mut last_valid: Option<(i64, GazePoint)> = None;
    for f in 0..n_frames {
        let t = manifest.slot_time(f);
        // Nearest gaze sample; strict comparison keeps the earlier on ties.
        while gi + 1 < gaze.len()
            && (gaze[gi + 1].t_ms - t).abs() < (gaze[gi].t_ms - t).abs()
        {
            gi += 1;
        }
        let candidate = &gaze[gi];
        let matched = ((candidate.t_ms - t) as f64).abs() <= half && candidate.valid;
        let gaze_point = if matched {
            let p = GazePoint {
                x_px: candidate.x_px,
                y_px: candidate.y_px,
            };
            last_valid = Some((candidate.t_ms, p));
            Some(p)
        } else {
            match last_valid {
                Some((ts, p)) if t - ts <= max_gap_ms => Some(p),
                _ => None,
            }
        };

        while ti + 1 < telemetry.len()
            && (telemetry[ti + 1].t_ms - t).abs() < (telemetry[ti].t_ms - t).abs()
        {
            ti += 1;
        }
        let tel = (((telemetry[ti].t_ms - t) as f64).abs() <= half).then(|| telemetry[ti]);

        frames.push(FrameSlot {
            t_ms: t,
            gaze: gaze_point,
            detections: Vec::new(),
            telemetry: tel,
        });
    }
    for d in detections {
        if d.frame_idx < n_frames {
            frames[d.frame_idx].detections.push(d.clone());
        }
    }
    Ok(SyncedTrial {
        manifest: manifest.clone(),
        period_ms: period,
        frames,
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub fn manifest() -> TrialManifest {
        TrialManifest {
            trial_id: "t001".into(),
            subject_id: "s001".into(),
            group: FitnessGroup::Fit,
            fps: 50.0,
            width: 960,
            height: 540,
            target_labels: ["person".to_string()].into_iter().collect(),
            gaze_path: "gaze.csv".into(),
            detections_path: "detections.jsonl".into(),
            telemetry_path: "telemetry.csv".into(),
            crash_flag: false,
        }
    }

    pub fn gaze_at(t_ms: i64, x: f64, y: f64) -> GazeSample {
        GazeSample { t_ms, x_px: x, y_px: y, valid: true }
    }

    pub fn person_box(frame_idx: usize, x: f64, y: f64) -> Detection {
        Detection {
            frame_idx,
            t_ms: frame_idx as i64 * 20,
            label: "person".into(),
            conf: 0.9,
            bbox: BBox { x_min: x, y_min: y, x_max: x + 50.0, y_max: y + 110.0 },
        }
    }

    pub fn telemetry_at(t_ms: i64, speed: f64, dist: f64) -> TelemetrySample {
        TelemetrySample { t_ms, speed_kmh: speed, dist_m: dist }
    }
}
