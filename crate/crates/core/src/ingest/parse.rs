//! File-format readers and writers for the three trial streams and the
//! manifest. Malformed content is a hard error with the offending line;
//! silently skipping rows would bias event times.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BBox, Detection, FitnessGroup, GazeSample, IngestError, TelemetrySample, TrialManifest};

pub const GAZE_HEADER: &str = "t_ms,x_px,y_px,valid";
pub const TELEMETRY_HEADER: &str = "t_ms,speed_kmh,dist_m";

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn row_err(path: &Path, line: usize, msg: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a gaze CSV (`t_ms,x_px,y_px,valid`). A zero-byte file parses to an
/// empty stream; the trial is then excluded downstream as missing data.
pub fn parse_gaze(path: &Path) -> Result<Vec<GazeSample>, IngestError> {
    let text = read(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == GAZE_HEADER => {}
        Some((_, header)) => {
            return Err(row_err(path, 1, format!("expected header `{GAZE_HEADER}`, got `{header}`")))
        }
        None => return Ok(Vec::new()),
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(row_err(path, line_no, format!("expected 4 fields, got {}", fields.len())));
        }
        let t_ms: i64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| row_err(path, line_no, format!("bad t_ms `{}`", fields[0])))?;
        if t_ms < 0 {
            return Err(row_err(path, line_no, "t_ms must be non-negative"));
        }
        let x_px: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| row_err(path, line_no, format!("bad x_px `{}`", fields[1])))?;
        let y_px: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| row_err(path, line_no, format!("bad y_px `{}`", fields[2])))?;
        let valid = match fields[3].trim() {
            "0" => false,
            "1" => true,
            other => return Err(row_err(path, line_no, format!("valid must be 0 or 1, got `{other}`"))),
        };
        if let Some(prev) = samples.last() {
            let prev: &GazeSample = prev;
            if t_ms <= prev.t_ms {
                return Err(IngestError::NonMonotonicTime {
                    path: path.display().to_string(),
                    line: line_no,
                });
            }
        }
        samples.push(GazeSample { t_ms, x_px, y_px, valid });
    }
    Ok(samples)
}

pub fn write_gaze(samples: &[GazeSample]) -> String {
    let mut out = String::from(GAZE_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.t_ms,
            s.x_px,
            s.y_px,
            if s.valid { 1 } else { 0 }
        ));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRecord {
    frame: i64,
    t_ms: i64,
    label: String,
    conf: f64,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

/// Reads line-delimited JSON detector records, validates them against the
/// manifest's frame geometry and grid, and returns them grouped by ascending
/// frame index (canonical within-frame order, so input permutations of
/// simultaneous records cannot change downstream results).
pub fn parse_detections(path: &Path, manifest: &TrialManifest) -> Result<Vec<Detection>, IngestError> {
    let text = read(path)?;
    let mut detections = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| IngestError::MalformedRecord {
            path: path.display().to_string(),
            line: line_no,
            msg: e.to_string(),
        })?;
        if rec.frame < 0 {
            return Err(IngestError::MalformedRecord {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("negative frame index {}", rec.frame),
            });
        }
        if !(0.0..=1.0).contains(&rec.conf) {
            return Err(IngestError::MalformedRecord {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("confidence {} outside [0, 1]", rec.conf),
            });
        }
        let bbox = BBox {
            x_min: rec.x_min,
            y_min: rec.y_min,
            x_max: rec.x_max,
            y_max: rec.y_max,
        };
        if bbox.is_degenerate() {
            return Err(IngestError::DegenerateBBox {
                path: path.display().to_string(),
                line: line_no,
            });
        }
        if bbox.x_min < 0.0
            || bbox.y_min < 0.0
            || bbox.x_max > manifest.width as f64
            || bbox.y_max > manifest.height as f64
        {
            return Err(IngestError::BBoxOutOfFrame {
                path: path.display().to_string(),
                line: line_no,
                width: manifest.width,
                height: manifest.height,
            });
        }
        let expected_t = manifest.slot_time(rec.frame as usize);
        if rec.t_ms != expected_t {
            return Err(IngestError::MalformedRecord {
                path: path.display().to_string(),
                line: line_no,
                msg: format!(
                    "t_ms {} does not sit on the frame grid (frame {} at {} fps is {} ms)",
                    rec.t_ms, rec.frame, manifest.fps, expected_t
                ),
            });
        }
        detections.push(Detection {
            frame_idx: rec.frame as usize,
            t_ms: rec.t_ms,
            label: rec.label,
            conf: rec.conf,
            bbox,
        });
    }
    detections.sort_by(|a, b| {
        (a.frame_idx, a.bbox.x_min.to_bits(), a.bbox.y_min.to_bits(), a.bbox.x_max.to_bits(), a.bbox.y_max.to_bits(), &a.label)
            .cmp(&(b.frame_idx, b.bbox.x_min.to_bits(), b.bbox.y_min.to_bits(), b.bbox.x_max.to_bits(), b.bbox.y_max.to_bits(), &b.label))
    });
    Ok(detections)
}

pub fn write_detections(detections: &[Detection]) -> String {
    let mut out = String::new();
    for d in detections {
        let rec = DetectionRecord {
            frame: d.frame_idx as i64,
            t_ms: d.t_ms,
            label: d.label.clone(),
            conf: d.conf,
            x_min: d.bbox.x_min,
            y_min: d.bbox.y_min,
            x_max: d.bbox.x_max,
            y_max: d.bbox.y_max,
        };
        out.push_str(&serde_json::to_string(&rec).expect("detection record serializes"));
        out.push('\n');
    }
    out
}

/// Reads a telemetry CSV (`t_ms,speed_kmh,dist_m`). Sampling gaps above one
/// second are tolerated but reported as warnings.
pub fn parse_telemetry(path: &Path) -> Result<(Vec<TelemetrySample>, Vec<String>), IngestError> {
    let text = read(path)?;
    if text.trim().is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TELEMETRY_HEADER => {}
        Some((_, header)) => {
            return Err(row_err(path, 1, format!("expected header `{TELEMETRY_HEADER}`, got `{header}`")))
        }
        None => return Ok((Vec::new(), Vec::new())),
    }
    let mut samples: Vec<TelemetrySample> = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(row_err(path, line_no, format!("expected 3 fields, got {}", fields.len())));
        }
        let t_ms: i64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| row_err(path, line_no, format!("bad t_ms `{}`", fields[0])))?;
        let speed_kmh: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| row_err(path, line_no, format!("bad speed_kmh `{}`", fields[1])))?;
        let dist_m: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| row_err(path, line_no, format!("bad dist_m `{}`", fields[2])))?;
        if speed_kmh < 0.0 {
            return Err(row_err(path, line_no, "speed_kmh must be non-negative"));
        }
        if dist_m < 0.0 {
            return Err(row_err(path, line_no, "dist_m must be non-negative"));
        }
        if let Some(prev) = samples.last() {
            if t_ms <= prev.t_ms {
                return Err(IngestError::NonMonotonicTime {
                    path: path.display().to_string(),
                    line: line_no,
                });
            }
            if t_ms - prev.t_ms > 1000 {
                warnings.push(format!(
                    "telemetry gap of {} ms between {} and {} ms",
                    t_ms - prev.t_ms,
                    prev.t_ms,
                    t_ms
                ));
            }
        }
        samples.push(TelemetrySample { t_ms, speed_kmh, dist_m });
    }
    Ok((samples, warnings))
}

pub fn write_telemetry(samples: &[TelemetrySample]) -> String {
    let mut out = String::from(TELEMETRY_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.t_ms, s.speed_kmh, s.dist_m));
    }
    out
}

/// Reads a `key = value` manifest. Stream paths are resolved relative to the
/// manifest's directory.
pub fn parse_manifest(path: &Path) -> Result<TrialManifest, IngestError> {
    let text = read(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let err = |msg: String| IngestError::Manifest {
        path: path.display().to_string(),
        msg,
    };
    let mut fields = std::collections::BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected `key = value`", idx + 1)))?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }
    let required = |key: &str| {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| err(format!("missing required key `{key}`")))
    };
    let group_raw = required("group")?;
    let group = FitnessGroup::parse(&group_raw)
        .ok_or_else(|| err(format!("group must be one of cond_fit/fit/unfit, got `{group_raw}`")))?;
    let fps: f64 = match fields.get("fps") {
        Some(v) => v.parse().map_err(|_| err(format!("bad fps `{v}`")))?,
        None => 50.0,
    };
    if fps <= 0.0 {
        return Err(err(format!("fps must be positive, got {fps}")));
    }
    let dim = |key: &str, default: u32| -> Result<u32, IngestError> {
        match fields.get(key) {
            Some(v) => {
                let d: u32 = v.parse().map_err(|_| err(format!("bad {key} `{v}`")))?;
                if d == 0 {
                    return Err(err(format!("{key} must be positive")));
                }
                Ok(d)
            }
            None => Ok(default),
        }
    };
    let target_labels: BTreeSet<String> = match fields.get("target_labels") {
        Some(v) => v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => ["person".to_string()].into_iter().collect(),
    };
    if target_labels.is_empty() {
        return Err(err("target_labels must not be empty".into()));
    }
    let crash_flag = match fields.get("crash_flag").map(String::as_str) {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") => true,
        Some(other) => return Err(err(format!("bad crash_flag `{other}`"))),
    };
    let resolve = |key: &str| -> Result<PathBuf, IngestError> { Ok(dir.join(required(key)?)) };
    Ok(TrialManifest {
        trial_id: required("trial_id")?,
        subject_id: required("subject_id")?,
        group,
        fps,
        width: dim("width", 960)?,
        height: dim("height", 540)?,
        target_labels,
        gaze_path: resolve("gaze")?,
        detections_path: resolve("detections")?,
        telemetry_path: resolve("telemetry")?,
        crash_flag,
    })
}

pub fn write_manifest(m: &TrialManifest) -> String {
    let labels: Vec<&str> = m.target_labels.iter().map(String::as_str).collect();
    format!(
        "trial_id = {}\nsubject_id = {}\ngroup = {}\nfps = {}\nwidth = {}\nheight = {}\ntarget_labels = {}\ngaze = {}\ndetections = {}\ntelemetry = {}\ncrash_flag = {}\n",
        m.trial_id,
        m.subject_id,
        m.group,
        m.fps,
        m.width,
        m.height,
        labels.join(","),
        m.gaze_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        m.detections_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        m.telemetry_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        m.crash_flag,
    )
}

#[cfg(test)]
mod tests {
    use super::super::testutil;
    use super::*;

    fn write_temp(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stream.csv");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn gaze_happy_path_and_frame_center() {
        let (_d, p) = write_temp("t_ms,x_px,y_px,valid\n100,480.0,270.0,1\n");
        let s = parse_gaze(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].t_ms, 100);
        assert_eq!((s[0].x_px, s[0].y_px), (480.0, 270.0));
        assert!(s[0].valid);
    }

    #[test]
    fn gaze_empty_file_is_empty_stream() {
        let (_d, p) = write_temp("");
        assert!(parse_gaze(&p).unwrap().is_empty());
        let (_d, p) = write_temp("t_ms,x_px,y_px,valid\n");
        assert!(parse_gaze(&p).unwrap().is_empty());
    }

    #[test]
    fn gaze_non_monotonic_rejected() {
        let (_d, p) = write_temp("t_ms,x_px,y_px,valid\n40,1.0,1.0,1\n20,1.0,1.0,1\n");
        assert!(matches!(
            parse_gaze(&p).unwrap_err(),
            IngestError::NonMonotonicTime { line: 3, .. }
        ));
    }

    #[test]
    fn gaze_malformed_rows_report_line() {
        let (_d, p) = write_temp("t_ms,x_px,y_px,valid\n0,1.0,1.0,1\n20,oops,1.0,1\n");
        assert!(matches!(
            parse_gaze(&p).unwrap_err(),
            IngestError::MalformedRow { line: 3, .. }
        ));
        let (_d, p) = write_temp("nope\n");
        assert!(matches!(
            parse_gaze(&p).unwrap_err(),
            IngestError::MalformedRow { line: 1, .. }
        ));
        let (_d, p) = write_temp("t_ms,x_px,y_px,valid\n-5,1.0,1.0,1\n");
        assert!(parse_gaze(&p).is_err());
        let (_d, p) = write_temp("t_ms,x_px,y_px,valid\n0,1.0,1.0,2\n");
        assert!(parse_gaze(&p).is_err());
    }

    fn det_line(frame: i64, label: &str, conf: f64, bbox: (f64, f64, f64, f64)) -> String {
        format!(
            "{{\"frame\":{frame},\"t_ms\":{},\"label\":\"{label}\",\"conf\":{conf},\"x_min\":{},\"y_min\":{},\"x_max\":{},\"y_max\":{}}}",
            frame * 20,
            bbox.0,
            bbox.1,
            bbox.2,
            bbox.3
        )
    }

    #[test]
    fn detections_degenerate_bbox() {
        let m = testutil::manifest();
        let (_d, p) = write_temp(&det_line(0, "person", 0.9, (10.0, 10.0, 5.0, 20.0)));
        assert!(matches!(
            parse_detections(&p, &m).unwrap_err(),
            IngestError::DegenerateBBox { line: 1, .. }
        ));
    }

    #[test]
    fn detections_conf_out_of_range() {
        let m = testutil::manifest();
        let (_d, p) = write_temp(&det_line(0, "person", 1.2, (10.0, 10.0, 50.0, 120.0)));
        assert!(matches!(
            parse_detections(&p, &m).unwrap_err(),
            IngestError::MalformedRecord { line: 1, .. }
        ));
    }

    #[test]
    fn detections_out_of_frame() {
        let m = testutil::manifest();
        let (_d, p) = write_temp(&det_line(0, "person", 0.9, (900.0, 10.0, 990.0, 120.0)));
        assert!(matches!(
            parse_detections(&p, &m).unwrap_err(),
            IngestError::BBoxOutOfFrame { line: 1, .. }
        ));
    }

    #[test]
    fn detections_off_grid_timestamp() {
        let m = testutil::manifest();
        let (_d, p) =
            write_temp("{\"frame\":1,\"t_ms\":25,\"label\":\"person\",\"conf\":0.9,\"x_min\":1,\"y_min\":1,\"x_max\":5,\"y_max\":9}\n");
        assert!(matches!(
            parse_detections(&p, &m).unwrap_err(),
            IngestError::MalformedRecord { line: 1, .. }
        ));
    }

    #[test]
    fn two_children_share_a_frame() {
        let m = testutil::manifest();
        let text = format!(
            "{}\n{}\n",
            det_line(50, "person", 0.9, (700.0, 300.0, 750.0, 410.0)),
            det_line(50, "person", 0.8, (640.0, 310.0, 690.0, 420.0)),
        );
        let (_d, p) = write_temp(&text);
        let dets = parse_detections(&p, &m).unwrap();
        assert_eq!(dets.len(), 2);
        assert!(dets.iter().all(|d| d.frame_idx == 50));
        // Canonical ordering by geometry, independent of input order.
        assert!(dets[0].bbox.x_min < dets[1].bbox.x_min);
    }

    #[test]
    fn telemetry_parse_and_gap_warning() {
        let (_d, p) = write_temp("t_ms,speed_kmh,dist_m\n0,50.0,100.0\n");
        let (s, w) = parse_telemetry(&p).unwrap();
        assert_eq!(s[0].speed_kmh, 50.0);
        assert_eq!(s[0].dist_m, 100.0);
        assert!(w.is_empty());

        let (_d, p) = write_temp("t_ms,speed_kmh,dist_m\n0,50.0,100.0\n1500,48.0,90.0\n");
        let (s, w) = parse_telemetry(&p).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("1500 ms"));

        let (_d, p) = write_temp("t_ms,speed_kmh,dist_m\n0,-1.0,100.0\n");
        assert!(matches!(
            parse_telemetry(&p).unwrap_err(),
            IngestError::MalformedRow { line: 2, .. }
        ));
    }

    #[test]
    fn manifest_round_trip_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(
            &path,
            "trial_id = t42\nsubject_id = s7\ngroup = cond_fit\ngaze = g.csv\ndetections = d.jsonl\ntelemetry = t.csv\n",
        )
        .unwrap();
        let m = parse_manifest(&path).unwrap();
        assert_eq!(m.trial_id, "t42");
        assert_eq!(m.group, FitnessGroup::CondFit);
        assert_eq!(m.fps, 50.0);
        assert_eq!((m.width, m.height), (960, 540));
        assert!(m.target_labels.contains("person"));
        assert!(!m.crash_flag);
        assert_eq!(m.gaze_path, dir.path().join("g.csv"));

        let text = write_manifest(&m);
        let path2 = dir.path().join("manifest2.txt");
        std::fs::write(&path2, &text).unwrap();
        let m2 = parse_manifest(&path2).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn manifest_rejects_bad_group() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(&path, "trial_id = a\nsubject_id = b\ngroup = superfit\ngaze = g\ndetections = d\ntelemetry = t\n").unwrap();
        assert!(matches!(parse_manifest(&path), Err(IngestError::Manifest { .. })));
    }

    #[test]
    fn stream_round_trips() {
        let gaze = vec![
            GazeSample { t_ms: 0, x_px: 480.0, y_px: 270.5, valid: true },
            GazeSample { t_ms: 20, x_px: 100.25, y_px: 30.125, valid: false },
        ];
        let (_d, p) = write_temp(&write_gaze(&gaze));
        assert_eq!(parse_gaze(&p).unwrap(), gaze);

        let tel = vec![
            TelemetrySample { t_ms: 0, speed_kmh: 30.5, dist_m: 62.25 },
            TelemetrySample { t_ms: 20, speed_kmh: 30.25, dist_m: 62.0 },
        ];
        let (_d, p) = write_temp(&write_telemetry(&tel));
        assert_eq!(parse_telemetry(&p).unwrap().0, tel);

        let m = testutil::manifest();
        let dets = vec![testutil::person_box(3, 100.0, 200.0), testutil::person_box(4, 104.5, 200.0)];
        let (_d, p) = write_temp(&write_detections(&dets));
        assert_eq!(parse_detections(&p, &m).unwrap(), dets);
    }
}
