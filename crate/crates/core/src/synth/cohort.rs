//! Whole-cohort generation: per-group sensing-time distributions with
//! randomized covariates, plus the `key = value` spec-file front end used by
//! the synth subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{BBox, FitnessGroup};

use super::{
    generate_trial, truth_row, ChildSpec, GazeTarget, ScenarioSpec, SynthError, SynthTrial,
    TRUTH_HEADER,
};

/// Sensing-time distribution for one fitness group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSpec {
    pub n: usize,
    pub delay_mean_ms: f64,
    pub delay_sd_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub seed: u64,
    pub fps: f64,
    pub duration_frames: usize,
    pub hazard_onset_frame: usize,
    pub fit: GroupSpec,
    pub cond_fit: GroupSpec,
    pub unfit: GroupSpec,
    pub speed_kmh_range: (f64, f64),
    pub distance_m_range: (f64, f64),
    pub gaze_jitter_sd_px: f64,
    pub gaze_dropout_prob: f64,
    pub detection_flicker_prob: f64,
    pub detection_miss_prob: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            seed: 0,
            fps: 50.0,
            duration_frames: 160,
            hazard_onset_frame: 50,
            fit: GroupSpec { n: 12, delay_mean_ms: 180.0, delay_sd_ms: 50.0 },
            cond_fit: GroupSpec { n: 12, delay_mean_ms: 290.0, delay_sd_ms: 90.0 },
            unfit: GroupSpec { n: 12, delay_mean_ms: 260.0, delay_sd_ms: 95.0 },
            speed_kmh_range: (8.0, 45.0),
            distance_m_range: (35.0, 90.0),
            gaze_jitter_sd_px: 1.5,
            gaze_dropout_prob: 0.0,
            detection_flicker_prob: 0.0,
            detection_miss_prob: 0.0,
        }
    }
}

impl CohortSpec {
    pub fn group(&self, g: FitnessGroup) -> &GroupSpec {
        match g {
            FitnessGroup::Fit => &self.fit,
            FitnessGroup::CondFit => &self.cond_fit,
            FitnessGroup::Unfit => &self.unfit,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.fit.n + self.cond_fit.n + self.unfit.n == 0 {
            return Err(SynthError::InvalidSpec("cohort has no trials".into()));
        }
        for (name, g) in [("fit", &self.fit), ("cond_fit", &self.cond_fit), ("unfit", &self.unfit)] {
            if g.n > 0 && (g.delay_mean_ms <= 0.0 || g.delay_sd_ms < 0.0) {
                return Err(SynthError::InvalidSpec(format!(
                    "group {name}: mean must be positive and sd non-negative"
                )));
            }
        }
        if self.speed_kmh_range.0 > self.speed_kmh_range.1 || self.speed_kmh_range.0 < 0.0 {
            return Err(SynthError::InvalidSpec("bad speed range".into()));
        }
        if self.distance_m_range.0 > self.distance_m_range.1 || self.distance_m_range.0 < 0.0 {
            return Err(SynthError::InvalidSpec("bad distance range".into()));
        }
        if self.hazard_onset_frame + 2 >= self.duration_frames {
            return Err(SynthError::InvalidSpec(
                "duration leaves no room after hazard onset".into(),
            ));
        }
        Ok(())
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Generates every trial of the cohort, in group-level order.
///
/// The programmed per-trial delay is drawn from the group's normal
/// distribution and quantized to the frame grid (at least one frame, so no
/// generated trial is anticipatory by construction).
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<SynthTrial>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let period = 1000.0 / spec.fps;
    let max_delay_frames = spec.duration_frames - spec.hazard_onset_frame - 2;
    let mut trials = Vec::new();
    let mut subject = 0usize;
    for group in FitnessGroup::ALL {
        let g = spec.group(group);
        if g.n == 0 {
            continue;
        }
        let delay_dist = Normal::new(g.delay_mean_ms, g.delay_sd_ms)
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        for i in 0..g.n {
            let delay_ms: f64 = delay_dist.sample(&mut rng);
            let delay_frames = ((delay_ms / period).round() as i64)
                .clamp(1, max_delay_frames as i64) as usize;
            let speed = uniform_in(&mut rng, spec.speed_kmh_range);
            let distance = uniform_in(&mut rng, spec.distance_m_range);
            let fixation = (
                uniform_in(&mut rng, (380.0, 560.0)),
                uniform_in(&mut rng, (130.0, 210.0)),
            );
            let vx = uniform_in(&mut rng, (-5.2, -3.6));
            let vy = uniform_in(&mut rng, (0.2, 0.7));
            let trial_seed = rng.random::<u64>();
            subject += 1;
            let scenario = ScenarioSpec {
                trial_id: format!("{}_{i:03}", group.as_str()),
                subject_id: format!("subj_{subject:03}"),
                group,
                seed: trial_seed,
                fps: spec.fps,
                width: 960,
                height: 540,
                duration_frames: spec.duration_frames,
                hazard_onset_frame: spec.hazard_onset_frame,
                gaze_delay_frames: delay_frames,
                children: vec![
                    ChildSpec {
                        start: BBox { x_min: 700.0, y_min: 300.0, x_max: 750.0, y_max: 410.0 },
                        velocity_px: (vx, vy),
                    },
                    ChildSpec {
                        start: BBox { x_min: 760.0, y_min: 310.0, x_max: 806.0, y_max: 416.0 },
                        velocity_px: (vx + 0.3, vy - 0.1),
                    },
                ],
                fixation_px: fixation,
                saccade_target: GazeTarget::HazardCenter,
                gaze_jitter_sd_px: spec.gaze_jitter_sd_px,
                gaze_dropout_prob: spec.gaze_dropout_prob,
                gaze_dropout_window: None,
                detection_flicker_prob: spec.detection_flicker_prob,
                detection_miss_prob: spec.detection_miss_prob,
                initial_speed_kmh: speed,
                deceleration_ms2: 6.0,
                initial_distance_m: distance,
                crash_flag: false,
            };
            trials.push(generate_trial(&scenario)?);
        }
    }
    Ok(trials)
}

/// Writes each trial under `dir/trials/<trial_id>/`, a combined `truth.csv`,
/// and a `manifests.txt` listing every manifest path in order.
pub fn write_cohort(trials: &[SynthTrial], dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    let io_err = |path: &Path, source: std::io::Error| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifests = Vec::with_capacity(trials.len());
    let mut truth = String::from(TRUTH_HEADER);
    truth.push('\n');
    let mut listing = String::new();
    for trial in trials {
        let tdir = dir.join("trials").join(&trial.manifest.trial_id);
        let manifest = trial.write_to_dir(&tdir)?;
        truth.push_str(&truth_row(&trial.manifest.trial_id, &trial.truth));
        truth.push('\n');
        listing.push_str(&manifest.display().to_string());
        listing.push('\n');
        manifests.push(manifest);
    }
    let truth_path = dir.join("truth.csv");
    std::fs::write(&truth_path, truth).map_err(|e| io_err(&truth_path, e))?;
    let listing_path = dir.join("manifests.txt");
    std::fs::write(&listing_path, listing).map_err(|e| io_err(&listing_path, e))?;
    Ok(manifests)
}

/// A parsed synth spec file: either one scenario or a whole cohort.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthSpec {
    Trial(Box<ScenarioSpec>),
    Cohort(CohortSpec),
}

/// Parses the `key = value` spec file (`kind = trial` or `kind = cohort`).
pub fn parse_spec_file(text: &str) -> Result<SynthSpec, SynthError> {
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SynthError::InvalidSpec(format!("line {}: expected `key = value`", idx + 1))
        })?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }
    let kind = fields.remove("kind").unwrap_or_else(|| "trial".into());
    match kind.as_str() {
        "trial" => parse_trial_fields(fields).map(|s| SynthSpec::Trial(Box::new(s))),
        "cohort" => parse_cohort_fields(fields).map(SynthSpec::Cohort),
        other => Err(SynthError::InvalidSpec(format!(
            "kind must be trial or cohort, got `{other}`"
        ))),
    }
}

fn bad_value(key: &str, value: &str) -> SynthError {
    SynthError::InvalidSpec(format!("bad {key} `{value}`"))
}

fn take<T: std::str::FromStr>(
    fields: &mut BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, SynthError> {
    match fields.remove(key) {
        Some(v) => v.parse().map_err(|_| bad_value(key, &v)),
        None => Ok(default),
    }
}

fn take_pair(
    fields: &mut BTreeMap<String, String>,
    key: &str,
    default: (f64, f64),
) -> Result<(f64, f64), SynthError> {
    match fields.remove(key) {
        None => Ok(default),
        Some(v) => {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(bad_value(key, &v));
            }
            let a = parts[0].parse().map_err(|_| bad_value(key, &v))?;
            let b = parts[1].parse().map_err(|_| bad_value(key, &v))?;
            Ok((a, b))
        }
    }
}

fn reject_leftovers(fields: BTreeMap<String, String>) -> Result<(), SynthError> {
    if let Some(key) = fields.into_keys().next() {
        return Err(SynthError::InvalidSpec(format!("unknown key `{key}`")));
    }
    Ok(())
}

fn parse_trial_fields(mut f: BTreeMap<String, String>) -> Result<ScenarioSpec, SynthError> {
    let d = ScenarioSpec::default();
    let group = match f.remove("group") {
        Some(v) => FitnessGroup::parse(&v).ok_or_else(|| bad_value("group", &v))?,
        None => d.group,
    };
    let saccade_target = match f.remove("saccade_target") {
        None => d.saccade_target,
        Some(v) if v == "hazard_center" => GazeTarget::HazardCenter,
        Some(v) => {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            let bad = || bad_value("saccade_target", &v);
            if parts.len() != 2 {
                return Err(bad());
            }
            GazeTarget::Fixed(
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
            )
        }
    };
    let mut children = Vec::new();
    for key in ["child1", "child2"] {
        if let Some(v) = f.remove(key) {
            let parts: Vec<f64> = v
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| bad_value(key, &v)))
                .collect::<Result<_, _>>()?;
            if parts.len() != 6 {
                return Err(bad_value(key, &v));
            }
            children.push(ChildSpec {
                start: BBox { x_min: parts[0], y_min: parts[1], x_max: parts[2], y_max: parts[3] },
                velocity_px: (parts[4], parts[5]),
            });
        }
    }
    if children.is_empty() {
        children = d.children.clone();
    }
    let fixation_px = take_pair(&mut f, "fixation", d.fixation_px)?;
    let dropout_window = match f.remove("gaze_dropout_window") {
        None => None,
        Some(v) => {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            let bad = || bad_value("gaze_dropout_window", &v);
            if parts.len() != 2 {
                return Err(bad());
            }
            Some((
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
            ))
        }
    };
    let spec = ScenarioSpec {
        trial_id: take(&mut f, "trial_id", d.trial_id)?,
        subject_id: take(&mut f, "subject_id", d.subject_id)?,
        group,
        seed: take(&mut f, "seed", d.seed)?,
        fps: take(&mut f, "fps", d.fps)?,
        width: take(&mut f, "width", d.width)?,
        height: take(&mut f, "height", d.height)?,
        duration_frames: take(&mut f, "duration_frames", d.duration_frames)?,
        hazard_onset_frame: take(&mut f, "hazard_onset_frame", d.hazard_onset_frame)?,
        gaze_delay_frames: take(&mut f, "gaze_delay_frames", d.gaze_delay_frames)?,
        children,
        fixation_px,
        saccade_target,
        gaze_jitter_sd_px: take(&mut f, "gaze_jitter_sd_px", d.gaze_jitter_sd_px)?,
        gaze_dropout_prob: take(&mut f, "gaze_dropout_prob", d.gaze_dropout_prob)?,
        gaze_dropout_window: dropout_window,
        detection_flicker_prob: take(&mut f, "detection_flicker_prob", d.detection_flicker_prob)?,
        detection_miss_prob: take(&mut f, "detection_miss_prob", d.detection_miss_prob)?,
        initial_speed_kmh: take(&mut f, "initial_speed_kmh", d.initial_speed_kmh)?,
        deceleration_ms2: take(&mut f, "deceleration_ms2", d.deceleration_ms2)?,
        initial_distance_m: take(&mut f, "initial_distance_m", d.initial_distance_m)?,
        crash_flag: take(&mut f, "crash_flag", d.crash_flag)?,
    };
    reject_leftovers(f)?;
    Ok(spec)
}

fn parse_cohort_fields(mut f: BTreeMap<String, String>) -> Result<CohortSpec, SynthError> {
    let d = CohortSpec::default();
    let group = |name: &str, dflt: GroupSpec, f: &mut BTreeMap<String, String>| -> Result<GroupSpec, SynthError> {
        Ok(GroupSpec {
            n: take(f, &format!("n_{name}"), dflt.n)?,
            delay_mean_ms: take(f, &format!("delay_mean_{name}_ms"), dflt.delay_mean_ms)?,
            delay_sd_ms: take(f, &format!("delay_sd_{name}_ms"), dflt.delay_sd_ms)?,
        })
    };
    let fit = group("fit", d.fit, &mut f)?;
    let cond_fit = group("cond_fit", d.cond_fit, &mut f)?;
    let unfit = group("unfit", d.unfit, &mut f)?;
    let spec = CohortSpec {
        seed: take(&mut f, "seed", d.seed)?,
        fps: take(&mut f, "fps", d.fps)?,
        duration_frames: take(&mut f, "duration_frames", d.duration_frames)?,
        hazard_onset_frame: take(&mut f, "hazard_onset_frame", d.hazard_onset_frame)?,
        fit,
        cond_fit,
        unfit,
        speed_kmh_range: take_pair(&mut f, "speed_kmh_range", d.speed_kmh_range)?,
        distance_m_range: take_pair(&mut f, "distance_m_range", d.distance_m_range)?,
        gaze_jitter_sd_px: take(&mut f, "gaze_jitter_sd_px", d.gaze_jitter_sd_px)?,
        gaze_dropout_prob: take(&mut f, "gaze_dropout_prob", d.gaze_dropout_prob)?,
        detection_flicker_prob: take(&mut f, "detection_flicker_prob", d.detection_flicker_prob)?,
        detection_miss_prob: take(&mut f, "detection_miss_prob", d.detection_miss_prob)?,
    };
    reject_leftovers(f)?;
    Ok(spec)
}
