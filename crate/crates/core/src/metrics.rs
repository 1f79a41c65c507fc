//! Per-trial hazard-perception metrics: sensing time, initial gaze distance,
//! time-to-collision, speed at onset, and the resolution-limited measurement
//! uncertainty of timestamp differences.

use thiserror::Error;

use crate::ingest::{BBox, Detection, GazePoint, SyncedTrial, TelemetrySample};

/// Default stationary-vehicle cutoff: TTC is unavailable below this speed.
pub const SPEED_EPS_KMH: f64 = 0.1;

/// Sensing times below one saccade duration are kept but flagged.
pub const LOW_ST_WARN_MS: i64 = 120;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("t2 ({t2_ms} ms) precedes t1 ({t1_ms} ms)")]
    NegativeInterval { t1_ms: i64, t2_ms: i64 },
    #[error("degenerate bounding box")]
    DegenerateBBox,
    #[error("no valid gaze at the hazard-onset frame")]
    InvalidGazeAtOnset,
    #[error("vehicle effectively stationary ({speed_kmh} km/h): TTC unavailable")]
    StationaryVehicle { speed_kmh: f64 },
    #[error("telemetry stream has no sample for the onset time")]
    NoTelemetryAtOnset,
    #[error("resolution must be positive, got {0} ms")]
    NonPositiveResolution(f64),
}

/// Sensing time: the difference of the two event timestamps.
pub fn sensing_time(t1_ms: i64, t2_ms: i64) -> Result<i64, MetricsError> {
    if t2_ms < t1_ms {
        return Err(MetricsError::NegativeInterval { t1_ms, t2_ms });
    }
    Ok(t2_ms - t1_ms)
}

/// Center of a detection rectangle.
pub fn roi_center(bbox: &BBox) -> Result<(f64, f64), MetricsError> {
    if bbox.is_degenerate() {
        return Err(MetricsError::DegenerateBBox);
    }
    Ok(bbox.center())
}

/// Center of the union of the target boxes present in one frame: with two
/// children on screen the hazard is treated as a single region.
pub fn union_target_center<'a>(
    detections: impl IntoIterator<Item = &'a Detection>,
) -> Option<(f64, f64)> {
    let mut union: Option<BBox> = None;
    for d in detections {
        union = Some(match union {
            None => d.bbox,
            Some(u) => u.union(&d.bbox),
        });
    }
    union.map(|u| u.center())
}

/// Euclidean pixel distance between gaze and ROI center, rounded to the
/// nearest integer.
pub fn initial_gaze_distance(gaze: GazePoint, center: (f64, f64)) -> i64 {
    let dx = gaze.x_px - center.0;
    let dy = gaze.y_px - center.1;
    (dx * dx + dy * dy).sqrt().round() as i64
}

/// Gaze at the onset frame paired with that frame's union target center.
pub fn igd_at_onset(
    trial: &SyncedTrial,
    t1_ms: i64,
    conf_min: f64,
) -> Result<i64, MetricsError> {
    let slot = &trial.frames[trial.frame_at(t1_ms)];
    let gaze = slot.gaze.ok_or(MetricsError::InvalidGazeAtOnset)?;
    let targets = slot
        .detections
        .iter()
        .filter(|d| d.conf >= conf_min && trial.manifest.target_labels.contains(&d.label));
    let center = union_target_center(targets).ok_or(MetricsError::InvalidGazeAtOnset)?;
    Ok(initial_gaze_distance(gaze, center))
}

/// Distance over speed, in seconds. Speeds at or below `eps_kmh` leave the
/// ratio undefined (the study likewise could not determine one TTC).
pub fn time_to_collision(dist_m: f64, speed_kmh: f64, eps_kmh: f64) -> Result<f64, MetricsError> {
    if speed_kmh <= eps_kmh {
        return Err(MetricsError::StationaryVehicle { speed_kmh });
    }
    Ok(dist_m / (speed_kmh / 3.6))
}

/// Speed of the telemetry sample nearest to t1; the earlier sample wins an
/// exact tie (the causal choice).
pub fn speed_at_onset(telemetry: &[TelemetrySample], t1_ms: i64) -> Result<f64, MetricsError> {
    telemetry_at_onset(telemetry, t1_ms).map(|s| s.speed_kmh)
}

/// The full telemetry sample nearest to t1 (same tie-break as speed).
pub fn telemetry_at_onset(
    telemetry: &[TelemetrySample],
    t1_ms: i64,
) -> Result<TelemetrySample, MetricsError> {
    let mut best: Option<&TelemetrySample> = None;
    for s in telemetry {
        match best {
            None => best = Some(s),
            Some(b) if (s.t_ms - t1_ms).abs() < (b.t_ms - t1_ms).abs() => best = Some(s),
            _ => {}
        }
    }
    best.copied().ok_or(MetricsError::NoTelemetryAtOnset)
}

/// GUM Type B uncertainty of timestamps quantized to `resolution_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyReport {
    pub resolution_ms: f64,
    /// Single-timestamp standard uncertainty, resolution / sqrt(12).
    pub u_b_ms: f64,
    /// Combined uncertainty of a two-timestamp difference, sqrt(2) * u_b.
    pub u_combined_ms: f64,
}

pub fn type_b_uncertainty(resolution_ms: f64) -> Result<UncertaintyReport, MetricsError> {
    if resolution_ms <= 0.0 {
        return Err(MetricsError::NonPositiveResolution(resolution_ms));
    }
    let u_b_ms = resolution_ms / 12.0f64.sqrt();
    Ok(UncertaintyReport {
        resolution_ms,
        u_b_ms,
        u_combined_ms: std::f64::consts::SQRT_2 * u_b_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::BBox;

    #[test]
    fn sensing_time_basics() {
        assert_eq!(sensing_time(1000, 1000).unwrap(), 0);
        assert_eq!(sensing_time(1000, 1160).unwrap(), 160);
        assert!(matches!(
            sensing_time(1000, 900),
            Err(MetricsError::NegativeInterval { .. })
        ));
    }

    #[test]
    fn sensing_time_translation_invariant() {
        for delta in [-100_000i64, -20, 0, 7, 123_456] {
            assert_eq!(
                sensing_time(1000 + delta, 1160 + delta).unwrap(),
                sensing_time(1000, 1160).unwrap()
            );
        }
    }

    #[test]
    fn roi_center_midpoints() {
        let full = BBox { x_min: 0.0, y_min: 0.0, x_max: 960.0, y_max: 540.0 };
        assert_eq!(roi_center(&full).unwrap(), (480.0, 270.0));
        let b = BBox { x_min: 10.0, y_min: 20.0, x_max: 30.0, y_max: 60.0 };
        assert_eq!(roi_center(&b).unwrap(), (20.0, 40.0));
        let bad = BBox { x_min: 10.0, y_min: 10.0, x_max: 5.0, y_max: 20.0 };
        assert!(matches!(roi_center(&bad), Err(MetricsError::DegenerateBBox)));
    }

    #[test]
    fn igd_triangle_and_symmetry() {
        let origin = GazePoint { x_px: 0.0, y_px: 0.0 };
        assert_eq!(initial_gaze_distance(origin, (3.0, 4.0)), 5);
        let p = GazePoint { x_px: 480.0, y_px: 270.0 };
        assert_eq!(initial_gaze_distance(p, (480.0, 270.0)), 0);
        // Symmetric in the two points and translation invariant.
        let a = GazePoint { x_px: 12.0, y_px: 34.0 };
        let b = (56.0, 7.0);
        let d1 = initial_gaze_distance(a, b);
        let d2 = initial_gaze_distance(GazePoint { x_px: b.0, y_px: b.1 }, (a.x_px, a.y_px));
        assert_eq!(d1, d2);
        let shift = |p: (f64, f64)| (p.0 + 100.0, p.1 - 40.0);
        let a2 = GazePoint { x_px: a.x_px + 100.0, y_px: a.y_px - 40.0 };
        assert_eq!(initial_gaze_distance(a2, shift(b)), d1);
        assert_eq!(initial_gaze_distance(origin, (0.6, 0.0)), 1, "rounds to nearest");
    }

    #[test]
    fn ttc_values_and_homogeneity() {
        assert_eq!(time_to_collision(0.0, 50.0, SPEED_EPS_KMH).unwrap(), 0.0);
        let t = time_to_collision(27.78, 50.0, SPEED_EPS_KMH).unwrap();
        assert!((t - 2.0).abs() < 5e-3, "27.78 m at 50 km/h: {t}");
        let t = time_to_collision(22.19, 47.0, SPEED_EPS_KMH).unwrap();
        assert!((t - 1.7).abs() < 5e-3, "22.19 m at 47 km/h: {t}");

        let base = time_to_collision(40.0, 20.0, SPEED_EPS_KMH).unwrap();
        let double_dist = time_to_collision(80.0, 20.0, SPEED_EPS_KMH).unwrap();
        let double_speed = time_to_collision(40.0, 40.0, SPEED_EPS_KMH).unwrap();
        assert!((double_dist - 2.0 * base).abs() < 1e-12);
        assert!((double_speed - base / 2.0).abs() < 1e-12);

        assert!(matches!(
            time_to_collision(10.0, 0.05, SPEED_EPS_KMH),
            Err(MetricsError::StationaryVehicle { .. })
        ));
    }

    #[test]
    fn speed_nearest_with_causal_tie_break() {
        let tel = vec![
            TelemetrySample { t_ms: 990, speed_kmh: 14.0, dist_m: 30.0 },
            TelemetrySample { t_ms: 1010, speed_kmh: 16.0, dist_m: 29.0 },
        ];
        assert_eq!(speed_at_onset(&tel, 1000).unwrap(), 14.0);
        assert_eq!(speed_at_onset(&tel, 1005).unwrap(), 16.0);
        let constant = vec![TelemetrySample { t_ms: 0, speed_kmh: 15.0, dist_m: 10.0 }];
        assert_eq!(speed_at_onset(&constant, 900).unwrap(), 15.0);
        assert!(matches!(
            speed_at_onset(&[], 1000),
            Err(MetricsError::NoTelemetryAtOnset)
        ));
    }

    #[test]
    fn type_b_uncertainty_values() {
        let u = type_b_uncertainty(20.0).unwrap();
        assert!((u.u_b_ms - 5.77).abs() <= 0.01);
        assert!((u.u_combined_ms / u.u_b_ms - std::f64::consts::SQRT_2).abs() < 1e-15);
        let u = type_b_uncertainty(10.0).unwrap();
        assert!((u.u_b_ms - 2.887).abs() < 5e-4);
        assert!(matches!(
            type_b_uncertainty(0.0),
            Err(MetricsError::NonPositiveResolution(_))
        ));
    }

    #[test]
    fn union_center_for_two_children() {
        let a = Detection {
            frame_idx: 0,
            t_ms: 0,
            label: "person".into(),
            conf: 0.9,
            bbox: BBox { x_min: 700.0, y_min: 300.0, x_max: 750.0, y_max: 410.0 },
        };
        let b = Detection {
            bbox: BBox { x_min: 640.0, y_min: 310.0, x_max: 690.0, y_max: 420.0 },
            ..a.clone()
        };
        let c = union_target_center([&a, &b]).unwrap();
        assert_eq!(c, ((640.0 + 750.0) / 2.0, (300.0 + 420.0) / 2.0));
        assert_eq!(union_target_center(std::iter::empty::<&Detection>()), None);
    }
}
