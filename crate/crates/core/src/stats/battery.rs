//! The full cohort battery: validity filters in configured order, per-group
//! summaries and box statistics, Welch's ANOVA, Tukey HSD, the sequential
//! linear model with Shapiro-Wilk on its residuals, Pearson correlations,
//! and the measurement-uncertainty block.

use crate::config::{FilterOrder, RunConfig};
use crate::events::Exclusion;
use crate::ingest::FitnessGroup;
use crate::metrics::{type_b_uncertainty, UncertaintyReport};
use crate::table::{TrialRecord, TrialStatus};

use super::glm::{fit_glm, GlmResult, GlmRow};
use super::pearson::{pearson_r, PearsonResult};
use super::shapiro::{shapiro_wilk, ShapiroResult};
use super::tukey::{tukey_hsd, TukeyRow};
use super::welch::{welch_anova, WelchResult};
use super::{group_summary, BoxStats, GroupSummary, StatsError};

/// Everything the cohort report needs for one group.
#[derive(Debug, Clone)]
pub struct GroupBlock {
    pub group: FitnessGroup,
    pub st: GroupSummary,
    pub speed: Option<GroupSummary>,
    pub igd: Option<GroupSummary>,
    pub ttc: Option<GroupSummary>,
    pub box_stats: BoxStats,
}

/// Result of the whole statistics battery on one cohort table.
#[derive(Debug, Clone)]
pub struct StatBattery {
    pub n_input: usize,
    pub groups: Vec<GroupBlock>,
    pub welch: WelchResult,
    pub tukey: Vec<TukeyRow>,
    pub glm: Option<GlmResult>,
    pub glm_alpha: f64,
    pub shapiro: Option<ShapiroResult>,
    /// Correlations of ST against each covariate, by covariate name.
    pub pearson: Vec<(&'static str, PearsonResult)>,
    pub uncertainty: UncertaintyReport,
    pub excluded: Vec<(String, Exclusion)>,
    pub misses: Vec<(String, i64)>,
    pub outliers: Vec<(String, i64)>,
    pub notes: Vec<String>,
    /// Input rows with miss/outlier statuses assigned by this run.
    pub annotated: Vec<TrialRecord>,
}

struct Candidate {
    idx: usize,
    st: i64,
}

/// Runs the battery over a cohort table.
///
/// Rows already carrying miss/outlier statuses are re-filtered from scratch,
/// so re-running on an annotated table is idempotent.
pub fn run_battery(records: &[TrialRecord], cfg: &RunConfig) -> Result<StatBattery, StatsError> {
    let mut annotated = records.to_vec();
    let mut notes = Vec::new();
    let mut excluded = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    for (idx, r) in records.iter().enumerate() {
        match r.status {
            TrialStatus::Excluded(code) => excluded.push((r.trial_id.clone(), code)),
            _ => match r.st_ms {
                Some(st) => candidates.push(Candidate { idx, st }),
                None => notes.push(format!(
                    "trial {} has no sensing time despite status `{}`; ignored",
                    r.trial_id, r.status
                )),
            },
        }
    }
    excluded.sort();

    let run_miss = |cands: Vec<Candidate>, misses: &mut Vec<(String, i64)>| -> Vec<Candidate> {
        let (kept, missed): (Vec<_>, Vec<_>) =
            cands.into_iter().partition(|c| (c.st as f64) < cfg.max_st_ms);
        misses.extend(missed.iter().map(|c| (records[c.idx].trial_id.clone(), c.st)));
        kept
    };
    let run_iqr = |cands: Vec<Candidate>,
                   outliers: &mut Vec<(String, i64)>,
                   notes: &mut Vec<String>|
     -> Vec<Candidate> {
        if cands.len() < 4 {
            notes.push(format!(
                "outlier filter skipped: needs >= 4 sensing times, had {}",
                cands.len()
            ));
            return cands;
        }
        let sts: Vec<f64> = cands.iter().map(|c| c.st as f64).collect();
        let q1 = super::quantile(&sts, 0.25).expect("non-empty");
        let q3 = super::quantile(&sts, 0.75).expect("non-empty");
        let cutoff = q3 + cfg.iqr_k * (q3 - q1);
        let (out, kept): (Vec<_>, Vec<_>) =
            cands.into_iter().partition(|c| (c.st as f64) > cutoff);
        outliers.extend(out.iter().map(|c| (records[c.idx].trial_id.clone(), c.st)));
        kept
    };

    let mut misses = Vec::new();
    let mut outliers = Vec::new();
    let kept = match cfg.filter_order {
        FilterOrder::MissFirst => {
            let kept = run_miss(candidates, &mut misses);
            run_iqr(kept, &mut outliers, &mut notes)
        }
        FilterOrder::IqrFirst => {
            let kept = run_iqr(candidates, &mut outliers, &mut notes);
            run_miss(kept, &mut misses)
        }
    };
    misses.sort();
    outliers.sort();
    for (id, _) in &misses {
        let row = annotated.iter_mut().find(|r| &r.trial_id == id).unwrap();
        row.status = TrialStatus::Miss;
    }
    for (id, _) in &outliers {
        let row = annotated.iter_mut().find(|r| &r.trial_id == id).unwrap();
        row.status = TrialStatus::Outlier;
    }
    for c in &kept {
        annotated[c.idx].status = TrialStatus::Valid;
    }

    // Group the analysis set in level order.
    let mut group_rows: Vec<(FitnessGroup, Vec<&TrialRecord>)> = FitnessGroup::ALL
        .iter()
        .map(|&g| (g, Vec::new()))
        .collect();
    for c in &kept {
        let r = &records[c.idx];
        group_rows
            .iter_mut()
            .find(|(g, _)| *g == r.group)
            .unwrap()
            .1
            .push(r);
    }
    group_rows.retain(|(_, rows)| !rows.is_empty());
    let populated = group_rows
        .iter()
        .filter(|(_, rows)| rows.len() >= 2)
        .count();
    if group_rows.len() < 2 || populated < group_rows.len() {
        return Err(StatsError::DegenerateCohort(format!(
            "need >= 2 groups with >= 2 valid sensing times each, got {:?}",
            group_rows
                .iter()
                .map(|(g, rows)| (g.as_str(), rows.len()))
                .collect::<Vec<_>>()
        )));
    }
    if group_rows.len() < 3 {
        notes.push(format!(
            "only {} fitness levels present; omnibus tests compare those",
            group_rows.len()
        ));
    }

    let collect =
        |rows: &[&TrialRecord], get: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
            rows.iter().filter_map(|r| get(r)).collect()
        };
    let mut groups = Vec::new();
    let mut st_groups = Vec::new();
    let mut labels = Vec::new();
    for (g, rows) in &group_rows {
        let sts: Vec<f64> = rows.iter().map(|r| r.st_ms.unwrap() as f64).collect();
        let speed = collect(rows, |r| r.speed_kmh);
        let igd = collect(rows, |r| r.igd_px.map(|v| v as f64));
        let ttc = collect(rows, |r| r.ttc_s);
        groups.push(GroupBlock {
            group: *g,
            st: group_summary(&sts)?,
            speed: (!speed.is_empty()).then(|| group_summary(&speed)).transpose()?,
            igd: (!igd.is_empty()).then(|| group_summary(&igd)).transpose()?,
            ttc: (!ttc.is_empty()).then(|| group_summary(&ttc)).transpose()?,
            box_stats: BoxStats::from_data(&sts, cfg.iqr_k)?,
        });
        st_groups.push(sts);
        labels.push(g.as_str().to_string());
    }

    let welch = welch_anova(&st_groups)?;
    let tukey = tukey_hsd(&labels, &st_groups, cfg.conf_level)?;

    // Linear model on complete-covariate rows only.
    let mut glm_rows = Vec::new();
    let mut dropped = 0usize;
    for c in &kept {
        let r = &records[c.idx];
        match (r.speed_kmh, r.igd_px, r.ttc_s) {
            (Some(speed), Some(igd), Some(ttc)) => glm_rows.push(GlmRow {
                group: r.group,
                st_ms: c.st as f64,
                speed_kmh: speed,
                igd_px: igd as f64,
                ttc_s: ttc,
            }),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        notes.push(format!(
            "{dropped} trial(s) without complete covariates left out of the linear model"
        ));
    }
    let glm = match fit_glm(&glm_rows) {
        Ok(fit) => Some(fit),
        Err(e) => {
            notes.push(format!("linear model not fitted: {e}"));
            None
        }
    };
    let shapiro = match &glm {
        Some(fit) => match shapiro_wilk(&fit.residuals) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("Shapiro-Wilk on residuals not run: {e}"));
                None
            }
        },
        None => None,
    };

    let mut pearson = Vec::new();
    type Getter = fn(&TrialRecord) -> Option<f64>;
    let covariates: [(&'static str, Getter); 3] = [
        ("speed", |r| r.speed_kmh),
        ("igd", |r| r.igd_px.map(|v| v as f64)),
        ("ttc", |r| r.ttc_s),
    ];
    for (name, get) in covariates {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for c in &kept {
            let r = &records[c.idx];
            if let Some(v) = get(r) {
                xs.push(c.st as f64);
                ys.push(v);
            }
        }
        match pearson_r(&ys, &xs) {
            Ok(res) => pearson.push((name, res)),
            Err(e) => notes.push(format!("Pearson ST~{name} not computed: {e}")),
        }
    }

    let uncertainty = type_b_uncertainty(cfg.resolution_ms)
        .map_err(|e| StatsError::InvalidArgument(e.to_string()))?;

    Ok(StatBattery {
        n_input: records.len(),
        groups,
        welch,
        tukey,
        glm,
        glm_alpha: cfg.glm_alpha,
        shapiro,
        pearson,
        uncertainty,
        excluded,
        misses,
        outliers,
        notes,
        annotated,
    })
}
