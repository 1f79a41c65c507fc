//! Seeded synthetic trial generator.
//!
//! Builds the run-out scenario as data: children boxes sliding linearly
//! across the carriageway from behind a parked bus, a gaze stream that
//! fixates ahead and saccades onto the hazard after a programmed delay, and
//! simulator telemetry for a vehicle that brakes once the driver reacts.
//! Generation is a pure function of the spec (ChaCha8 with explicit seeding,
//! no system entropy), and the emitted ground truth is the oracle the event
//! pipeline is tested against.

pub mod cohort;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ingest::{
    write_detections, write_gaze, write_manifest, write_telemetry, BBox, Detection, FitnessGroup,
    GazeSample, TelemetrySample, TrialManifest,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One pedestrian: a starting box at hazard onset and a per-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildSpec {
    pub start: BBox,
    pub velocity_px: (f64, f64),
}

/// Where the gaze lands after the programmed saccade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GazeTarget {
    /// Track the lead child's box center frame by frame.
    HazardCenter,
    Fixed(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub trial_id: String,
    pub subject_id: String,
    pub group: FitnessGroup,
    pub seed: u64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub duration_frames: usize,
    pub hazard_onset_frame: usize,
    /// Ground-truth sensing time in frames.
    pub gaze_delay_frames: usize,
    pub children: Vec<ChildSpec>,
    pub fixation_px: (f64, f64),
    pub saccade_target: GazeTarget,
    pub gaze_jitter_sd_px: f64,
    pub gaze_dropout_prob: f64,
    /// Scripted dropout window (start frame, length) for exclusion fixtures.
    pub gaze_dropout_window: Option<(usize, usize)>,
    pub detection_flicker_prob: f64,
    pub detection_miss_prob: f64,
    pub initial_speed_kmh: f64,
    pub deceleration_ms2: f64,
    pub initial_distance_m: f64,
    pub crash_flag: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            trial_id: "t000".into(),
            subject_id: "s000".into(),
            group: FitnessGroup::Fit,
            seed: 0,
            fps: 50.0,
            width: 960,
            height: 540,
            duration_frames: 150,
            hazard_onset_frame: 50,
            gaze_delay_frames: 8,
            children: vec![
                ChildSpec {
                    start: BBox { x_min: 700.0, y_min: 300.0, x_max: 750.0, y_max: 410.0 },
                    velocity_px: (-4.5, 0.5),
                },
                ChildSpec {
                    start: BBox { x_min: 760.0, y_min: 310.0, x_max: 806.0, y_max: 416.0 },
                    velocity_px: (-4.2, 0.4),
                },
            ],
            fixation_px: (480.0, 170.0),
            saccade_target: GazeTarget::HazardCenter,
            gaze_jitter_sd_px: 0.0,
            gaze_dropout_prob: 0.0,
            gaze_dropout_window: None,
            detection_flicker_prob: 0.0,
            detection_miss_prob: 0.0,
            initial_speed_kmh: 45.0,
            deceleration_ms2: 6.0,
            initial_distance_m: 60.0,
            crash_flag: false,
        }
    }
}

impl ScenarioSpec {
    pub fn slot_time(&self, f: usize) -> i64 {
        (f as f64 * 1000.0 / self.fps).round() as i64
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.fps <= 0.0 {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if self.duration_frames < 2 {
            return bad("duration_frames must be at least 2".into());
        }
        if self.hazard_onset_frame + self.gaze_delay_frames >= self.duration_frames {
            return bad(format!(
                "hazard_onset_frame + gaze_delay_frames ({} + {}) must fall before the {}-frame scenario end",
                self.hazard_onset_frame, self.gaze_delay_frames, self.duration_frames
            ));
        }
        if self.children.is_empty() || self.children.len() > 2 {
            return bad(format!("need 1 or 2 children, got {}", self.children.len()));
        }
        for (i, c) in self.children.iter().enumerate() {
            if c.start.is_degenerate() {
                return bad(format!("child {i} start box is degenerate"));
            }
        }
        for (name, p) in [
            ("gaze_dropout_prob", self.gaze_dropout_prob),
            ("detection_flicker_prob", self.detection_flicker_prob),
            ("detection_miss_prob", self.detection_miss_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.gaze_jitter_sd_px < 0.0 {
            return bad("gaze_jitter_sd_px must be non-negative".into());
        }
        if self.initial_speed_kmh < 0.0 || self.initial_distance_m < 0.0 || self.deceleration_ms2 < 0.0 {
            return bad("vehicle profile values must be non-negative".into());
        }
        Ok(())
    }

    /// True box of child `i` at frame `f`, clamped into the frame; None
    /// before onset or once fully out of view.
    fn child_box(&self, i: usize, f: usize) -> Option<BBox> {
        if f < self.hazard_onset_frame {
            return None;
        }
        let c = &self.children[i];
        let steps = (f - self.hazard_onset_frame) as f64;
        let b = BBox {
            x_min: c.start.x_min + c.velocity_px.0 * steps,
            y_min: c.start.y_min + c.velocity_px.1 * steps,
            x_max: c.start.x_max + c.velocity_px.0 * steps,
            y_max: c.start.y_max + c.velocity_px.1 * steps,
        };
        let (w, h) = (self.width as f64, self.height as f64);
        if b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > w || b.y_max > h {
            return None;
        }
        Some(b)
    }

    /// Union of the children boxes at frame `f`.
    fn hazard_union(&self, f: usize) -> Option<BBox> {
        let mut u: Option<BBox> = None;
        for i in 0..self.children.len() {
            if let Some(b) = self.child_box(i, f) {
                u = Some(match u {
                    None => b,
                    Some(acc) => acc.union(&b),
                });
            }
        }
        u
    }

    /// Where a gaze aimed at the hazard lands: the center of the lead
    /// child's box. The hull center of two separated children can fall in
    /// the gap between them, which would never register as a gaze hit.
    fn hazard_gaze_point(&self, f: usize) -> Option<(f64, f64)> {
        (0..self.children.len()).find_map(|i| self.child_box(i, f).map(|b| b.center()))
    }
}

/// Construction-time truth for one generated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub t1_ms: i64,
    pub t2_ms: i64,
    pub st_ms: i64,
    pub igd_px: i64,
    pub ttc_s: Option<f64>,
    pub speed_kmh: f64,
    pub anticipatory: bool,
}

/// A generated trial: manifest, the three streams, and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrial {
    pub manifest: TrialManifest,
    pub gaze: Vec<GazeSample>,
    pub detections: Vec<Detection>,
    pub telemetry: Vec<TelemetrySample>,
    pub truth: GroundTruth,
}

/// Static scene furniture: the parked bus the children emerge from behind.
const BUS_BOX: BBox = BBox { x_min: 770.0, y_min: 180.0, x_max: 950.0, y_max: 400.0 };

/// Generates one trial. Deterministic for a given spec; with every noise
/// knob at zero the event pipeline recovers the ground truth exactly.
pub fn generate_trial(spec: &ScenarioSpec) -> Result<SynthTrial, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.duration_frames;
    let onset = spec.hazard_onset_frame;
    let saccade_frame = onset + spec.gaze_delay_frames;
    let jitter = Normal::new(0.0, spec.gaze_jitter_sd_px)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

    // Gaze stream, one sample per frame tick.
    let mut gaze = Vec::with_capacity(n);
    for f in 0..n {
        let base = if f < saccade_frame {
            spec.fixation_px
        } else {
            match spec.saccade_target {
                GazeTarget::Fixed(x, y) => (x, y),
                GazeTarget::HazardCenter => {
                    spec.hazard_gaze_point(f).unwrap_or(spec.fixation_px)
                }
            }
        };
        let (mut x, mut y) = base;
        if spec.gaze_jitter_sd_px > 0.0 {
            x += jitter.sample(&mut rng);
            y += jitter.sample(&mut rng);
        }
        x = x.clamp(0.0, spec.width as f64);
        y = y.clamp(0.0, spec.height as f64);
        let in_window = spec
            .gaze_dropout_window
            .is_some_and(|(start, len)| f >= start && f < start + len);
        let dropped = in_window
            || (spec.gaze_dropout_prob > 0.0 && rng.random::<f64>() < spec.gaze_dropout_prob);
        gaze.push(GazeSample {
            t_ms: spec.slot_time(f),
            x_px: x,
            y_px: y,
            valid: !dropped,
        });
    }

    // Detections: bus always, children from onset, plus optional noise.
    let mut detections = Vec::new();
    let mut last_flicker: Option<usize> = None;
    for f in 0..n {
        let t_ms = spec.slot_time(f);
        detections.push(Detection {
            frame_idx: f,
            t_ms,
            label: "bus".into(),
            conf: 0.8,
            bbox: BUS_BOX,
        });
        if f >= onset {
            let missed =
                spec.detection_miss_prob > 0.0 && rng.random::<f64>() < spec.detection_miss_prob;
            if !missed {
                for (i, conf) in [(0usize, 0.9), (1, 0.88)] {
                    if i >= spec.children.len() {
                        break;
                    }
                    if let Some(bbox) = spec.child_box(i, f) {
                        detections.push(Detection {
                            frame_idx: f,
                            t_ms,
                            label: "person".into(),
                            conf,
                            bbox,
                        });
                    }
                }
            }
        } else if spec.detection_flicker_prob > 0.0 && f + 1 < onset {
            // Spurious single-frame detections: never adjacent to each other
            // or to the true onset, so a 2-frame debounce always rejects
            // them without shifting t1.
            let adjacent = last_flicker == Some(f.wrapping_sub(1));
            if !adjacent && rng.random::<f64>() < spec.detection_flicker_prob {
                let x = rng.random_range(50.0..spec.width as f64 - 110.0);
                let y = rng.random_range(50.0..spec.height as f64 - 170.0);
                detections.push(Detection {
                    frame_idx: f,
                    t_ms,
                    label: "person".into(),
                    conf: 0.6,
                    bbox: BBox { x_min: x, y_min: y, x_max: x + 55.0, y_max: y + 115.0 },
                });
                last_flicker = Some(f);
            }
        }
    }

    // Telemetry: constant speed until the driver reacts, then braking.
    let period_s = 1.0 / spec.fps;
    let mut telemetry = Vec::with_capacity(n);
    let mut dist_m = spec.initial_distance_m;
    let mut speed_kmh = spec.initial_speed_kmh;
    for f in 0..n {
        telemetry.push(TelemetrySample {
            t_ms: spec.slot_time(f),
            speed_kmh,
            dist_m,
        });
        dist_m = (dist_m - speed_kmh / 3.6 * period_s).max(0.0);
        if f + 1 > saccade_frame {
            speed_kmh = (speed_kmh - spec.deceleration_ms2 * 3.6 * period_s).max(0.0);
        }
    }

    let t1_ms = spec.slot_time(onset);
    let t2_ms = spec.slot_time(saccade_frame);
    let onset_gaze = &gaze[onset];
    let union = spec.hazard_union(onset).expect("children exist at onset");
    let (cx, cy) = union.center();
    let dx = onset_gaze.x_px - cx;
    let dy = onset_gaze.y_px - cy;
    let igd_px = (dx * dx + dy * dy).sqrt().round() as i64;
    let onset_tel = telemetry[onset];
    let ttc_s = (onset_tel.speed_kmh > crate::metrics::SPEED_EPS_KMH)
        .then(|| onset_tel.dist_m / (onset_tel.speed_kmh / 3.6));
    let onset_point = crate::ingest::GazePoint { x_px: onset_gaze.x_px, y_px: onset_gaze.y_px };
    let anticipatory = spec.gaze_delay_frames == 0
        || (0..spec.children.len()).any(|i| {
            spec.child_box(i, onset)
                .is_some_and(|b| b.contains_dilated(onset_point, 0.0))
        });

    let manifest = TrialManifest {
        trial_id: spec.trial_id.clone(),
        subject_id: spec.subject_id.clone(),
        group: spec.group,
        fps: spec.fps,
        width: spec.width,
        height: spec.height,
        target_labels: ["person".to_string()].into_iter().collect(),
        gaze_path: "gaze.csv".into(),
        detections_path: "detections.jsonl".into(),
        telemetry_path: "telemetry.csv".into(),
        crash_flag: spec.crash_flag,
    };
    Ok(SynthTrial {
        manifest,
        gaze,
        detections,
        telemetry,
        truth: GroundTruth {
            t1_ms,
            t2_ms,
            st_ms: t2_ms - t1_ms,
            igd_px,
            ttc_s,
            speed_kmh: onset_tel.speed_kmh,
            anticipatory,
        },
    })
}

pub const TRUTH_HEADER: &str = "trial_id,t1_ms,t2_ms,st_ms,igd_px,ttc_s,speed_kmh";

pub fn truth_row(trial_id: &str, t: &GroundTruth) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        trial_id,
        t.t1_ms,
        t.t2_ms,
        t.st_ms,
        t.igd_px,
        t.ttc_s.map_or_else(String::new, |v| v.to_string()),
        t.speed_kmh
    )
}

impl SynthTrial {
    /// Writes the four stream files into `dir` (plus a one-row truth
    /// sidecar) and returns the manifest path.
    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf, SynthError> {
        let io_err = |path: &Path, source: std::io::Error| SynthError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let write = |name: &str, contents: String| -> Result<PathBuf, SynthError> {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
            Ok(path)
        };
        write("gaze.csv", write_gaze(&self.gaze))?;
        write("detections.jsonl", write_detections(&self.detections))?;
        write("telemetry.csv", write_telemetry(&self.telemetry))?;
        write(
            "truth.csv",
            format!("{TRUTH_HEADER}\n{}\n", truth_row(&self.manifest.trial_id, &self.truth)),
        )?;
        write("manifest.txt", write_manifest(&self.manifest))
    }
}
