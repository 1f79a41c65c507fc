//! The cohort table: one row of per-trial metrics per analyzed trial, plus
//! the audit sidecar that carries trial-stage events (applied overrides,
//! warnings) into the cohort report.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::events::Exclusion;
use crate::ingest::FitnessGroup;

pub const TABLE_HEADER: &str = "trial_id,subject_id,group,st_ms,speed_kmh,igd_px,ttc_s,status,crash";
pub const AUDIT_HEADER: &str = "trial_id,kind,detail";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}:{line}: {msg}")]
    Malformed {
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

/// Validity of one trial's sensing time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Valid,
    /// ST at or above the miss threshold (assigned at cohort stage).
    Miss,
    /// ST above the interquartile cutoff (assigned at cohort stage).
    Outlier,
    Excluded(Exclusion),
}

impl TrialStatus {
    pub fn parse(s: &str) -> Option<TrialStatus> {
        match s {
            "valid" => Some(TrialStatus::Valid),
            "miss" => Some(TrialStatus::Miss),
            "outlier" => Some(TrialStatus::Outlier),
            other => other
                .strip_prefix("excluded:")
                .and_then(Exclusion::parse)
                .map(TrialStatus::Excluded),
        }
    }
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialStatus::Valid => f.write_str("valid"),
            TrialStatus::Miss => f.write_str("miss"),
            TrialStatus::Outlier => f.write_str("outlier"),
            TrialStatus::Excluded(code) => write!(f, "excluded:{code}"),
        }
    }
}

/// One cohort table row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: String,
    pub subject_id: String,
    pub group: FitnessGroup,
    pub st_ms: Option<i64>,
    pub speed_kmh: Option<f64>,
    pub igd_px: Option<i64>,
    pub ttc_s: Option<f64>,
    pub status: TrialStatus,
    pub crash: bool,
}

fn opt_to_field<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

impl TrialRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.trial_id,
            self.subject_id,
            self.group,
            opt_to_field(&self.st_ms),
            opt_to_field(&self.speed_kmh),
            opt_to_field(&self.igd_px),
            opt_to_field(&self.ttc_s),
            self.status,
            if self.crash { 1 } else { 0 },
        )
    }
}

fn parse_opt<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line: usize,
) -> Result<Option<T>, TableError> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse::<T>().map(Some).map_err(|_| TableError::Malformed {
        path: path.display().to_string(),
        line,
        msg: format!("bad {what} `{field}`"),
    })
}

/// Reads a cohort table CSV. Returns an empty vector for a missing file so
/// batch runs can build the table incrementally.
pub fn read_table(path: &Path) -> Result<Vec<TrialRecord>, TableError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(TableError::Io {
                path: path.display().to_string(),
                source,
            })
        }
    };
    let err = |line: usize, msg: String| TableError::Malformed {
        path: path.display().to_string(),
        line,
        msg,
    };
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TABLE_HEADER => {}
        Some((_, h)) => return Err(err(1, format!("expected header `{TABLE_HEADER}`, got `{h}`"))),
        None => return Ok(Vec::new()),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(line_no, format!("expected 9 fields, got {}", f.len())));
        }
        let group = FitnessGroup::parse(f[2])
            .ok_or_else(|| err(line_no, format!("unknown group `{}`", f[2])))?;
        let status = TrialStatus::parse(f[7])
            .ok_or_else(|| err(line_no, format!("unknown status `{}`", f[7])))?;
        let crash = match f[8] {
            "0" => false,
            "1" => true,
            other => return Err(err(line_no, format!("bad crash flag `{other}`"))),
        };
        rows.push(TrialRecord {
            trial_id: f[0].to_string(),
            subject_id: f[1].to_string(),
            group,
            st_ms: parse_opt(f[3], "st_ms", path, line_no)?,
            speed_kmh: parse_opt(f[4], "speed_kmh", path, line_no)?,
            igd_px: parse_opt(f[5], "igd_px", path, line_no)?,
            ttc_s: parse_opt(f[6], "ttc_s", path, line_no)?,
            status,
            crash,
        });
    }
    Ok(rows)
}

/// Writes a complete table, rows sorted by trial id.
pub fn write_table(path: &Path, rows: &[TrialRecord]) -> Result<(), TableError> {
    let mut sorted: Vec<&TrialRecord> = rows.iter().collect();
    sorted.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Appends rows to an existing table (creating it with a header first).
pub fn append_rows(path: &Path, rows: &[TrialRecord]) -> Result<(), TableError> {
    let mut existing = read_table(path)?;
    existing.extend(rows.iter().cloned());
    write_table(path, &existing)
}

/// One audit sidecar entry produced at trial stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub trial_id: String,
    /// `override`, `warning`, or `flag`.
    pub kind: String,
    pub detail: String,
}

/// Audit sidecar path for a given table: `cohort.csv` -> `cohort.audit.csv`.
pub fn audit_path(table: &Path) -> PathBuf {
    let stem = table
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cohort".into());
    table.with_file_name(format!("{stem}.audit.csv"))
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditRecord>, TableError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(TableError::Io {
                path: path.display().to_string(),
                source,
            })
        }
    };
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let trial_id = parts.next().unwrap_or("").to_string();
        let kind = parts.next().unwrap_or("").to_string();
        let detail = parts.next().unwrap_or("").to_string();
        if trial_id.is_empty() || kind.is_empty() {
            return Err(TableError::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                msg: "expected trial_id,kind,detail".into(),
            });
        }
        records.push(AuditRecord { trial_id, kind, detail });
    }
    Ok(records)
}

pub fn append_audit(path: &Path, records: &[AuditRecord]) -> Result<(), TableError> {
    if records.is_empty() {
        return Ok(());
    }
    let mut all = read_audit(path)?;
    all.extend(records.iter().cloned());
    all.sort_by(|a, b| (&a.trial_id, &a.kind, &a.detail).cmp(&(&b.trial_id, &b.kind, &b.detail)));
    let mut out = String::from(AUDIT_HEADER);
    out.push('\n');
    for r in &all {
        out.push_str(&format!("{},{},{}\n", r.trial_id, r.kind, r.detail));
    }
    std::fs::write(path, out).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })
}
