//! Report rendering: the cohort statistics document, the box-stats
//! document, and the SVG box plot. All output is a pure function of its
//! inputs so repeated runs are byte-identical.

pub mod svg;

use std::fmt::Write as _;

use crate::config::RunConfig;
use crate::ingest::FitnessGroup;
use crate::stats::{BoxStats, GroupSummary, StatBattery, StatsError};
use crate::table::{AuditRecord, TrialRecord, TrialStatus};

fn fmt_p(p: f64) -> String {
    format!("{p:.7}")
}

fn line_summary(out: &mut String, measure: &str, group: FitnessGroup, s: &GroupSummary) {
    let _ = writeln!(
        out,
        "[{measure}] {group}: n={} range={:.1}..{:.1} mean={:.1} (sd={:.1}) median={:.1}",
        s.n, s.min, s.max, s.mean, s.sd, s.median
    );
}

/// Renders the full statistics report.
pub fn render_report(
    battery: &StatBattery,
    sidecar: &[AuditRecord],
    cfg: &RunConfig,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sensing-time cohort report");
    let _ = writeln!(out, "==========================");
    let valid: usize = battery.groups.iter().map(|g| g.st.n).sum();
    let _ = writeln!(
        out,
        "trials: input={} valid={} excluded={} misses={} outliers={}",
        battery.n_input,
        valid,
        battery.excluded.len(),
        battery.misses.len(),
        battery.outliers.len()
    );
    let _ = writeln!(
        out,
        "filters: {} (miss >= {} ms, outliers above q3 + {} * iqr)",
        cfg.filter_order, cfg.max_st_ms, cfg.iqr_k
    );

    let _ = writeln!(out, "\n== group summaries (analysis set) ==");
    for g in &battery.groups {
        line_summary(&mut out, "st_ms", g.group, &g.st);
    }
    for g in &battery.groups {
        if let Some(s) = &g.speed {
            line_summary(&mut out, "speed_kmh", g.group, s);
        }
    }
    for g in &battery.groups {
        if let Some(s) = &g.igd {
            line_summary(&mut out, "igd_px", g.group, s);
        }
    }
    for g in &battery.groups {
        if let Some(s) = &g.ttc {
            line_summary(&mut out, "ttc_s", g.group, s);
        }
    }

    let _ = writeln!(out, "\n== box stats (st_ms) ==");
    for g in &battery.groups {
        let _ = writeln!(out, "{}", box_line(g.group, &g.box_stats));
    }

    let _ = writeln!(out, "\n== welch anova ==");
    let _ = writeln!(
        out,
        "F = {:.3}, df1 = {:.0}, df2 = {:.3}, p = {}",
        battery.welch.f,
        battery.welch.df1,
        battery.welch.df2,
        fmt_p(battery.welch.p)
    );

    let _ = writeln!(out, "\n== tukey hsd (conf {}) ==", cfg.conf_level);
    for row in &battery.tukey {
        let _ = writeln!(
            out,
            "{} vs {}: diff={:.0} ms, CI [{:.0}, {:.0}], p_adj={}",
            row.group_a,
            row.group_b,
            row.diff,
            row.lwr,
            row.upr,
            fmt_p(row.p_adj)
        );
    }

    let _ = writeln!(out, "\n== linear model (sequential SS, alpha {}) ==", battery.glm_alpha);
    match &battery.glm {
        Some(glm) => {
            for t in &glm.terms {
                let _ = writeln!(
                    out,
                    "{}: df={} SS={:.3} F={:.3} p={} significant={}",
                    t.name,
                    t.df,
                    t.sum_sq,
                    t.f,
                    fmt_p(t.p),
                    if t.p < battery.glm_alpha { "yes" } else { "no" }
                );
            }
            let _ = writeln!(
                out,
                "residuals: df={} RSS={:.3} total SS={:.3}",
                glm.residual_df, glm.residual_ss, glm.total_ss
            );
        }
        None => {
            let _ = writeln!(out, "not fitted");
        }
    }

    let _ = writeln!(out, "\n== shapiro-wilk (model residuals) ==");
    match &battery.shapiro {
        Some(sw) => {
            let _ = writeln!(out, "W = {:.4}, p = {}", sw.w, fmt_p(sw.p));
        }
        None => {
            let _ = writeln!(out, "not run");
        }
    }

    let _ = writeln!(out, "\n== pearson correlations (st vs covariate) ==");
    for (name, r) in &battery.pearson {
        let _ = writeln!(out, "{name}: r={:.3} p={} n={}", r.r, fmt_p(r.p), r.n);
    }

    let _ = writeln!(out, "\n== measurement uncertainty ==");
    let u = &battery.uncertainty;
    let _ = writeln!(
        out,
        "resolution {} ms: u_b = {:.2} ms (type B), u_combined = {:.2} ms (two-timestamp difference)",
        u.resolution_ms, u.u_b_ms, u.u_combined_ms
    );

    let _ = writeln!(out, "\n== audit log ==");
    let _ = writeln!(out, "excluded trials ({}):", battery.excluded.len());
    for (id, code) in &battery.excluded {
        let _ = writeln!(out, "  {id}: {code}");
    }
    let _ = writeln!(out, "misses ({}):", battery.misses.len());
    for (id, st) in &battery.misses {
        let _ = writeln!(out, "  {id}: {st} ms");
    }
    let _ = writeln!(out, "outliers ({}):", battery.outliers.len());
    for (id, st) in &battery.outliers {
        let _ = writeln!(out, "  {id}: {st} ms");
    }
    let overrides: Vec<&AuditRecord> = sidecar.iter().filter(|r| r.kind == "override").collect();
    let _ = writeln!(out, "overrides applied ({}):", overrides.len());
    for r in overrides {
        let _ = writeln!(out, "  {}: {}", r.trial_id, r.detail);
    }
    let others: Vec<&AuditRecord> = sidecar.iter().filter(|r| r.kind != "override").collect();
    if !others.is_empty() {
        let _ = writeln!(out, "flags and warnings ({}):", others.len());
        for r in others {
            let _ = writeln!(out, "  {} [{}]: {}", r.trial_id, r.kind, r.detail);
        }
    }
    for n in &battery.notes {
        let _ = writeln!(out, "note: {n}");
    }
    let _ = writeln!(
        out,
        "reconciliation: input {} = valid {} + excluded {} + misses {} + outliers {}",
        battery.n_input,
        valid,
        battery.excluded.len(),
        battery.misses.len(),
        battery.outliers.len()
    );
    out
}

fn box_line(group: FitnessGroup, b: &BoxStats) -> String {
    let outliers: Vec<String> = b.outliers.iter().map(|v| format!("{v:.0}")).collect();
    format!(
        "{group}: min={:.1} q1={:.1} median={:.1} q3={:.1} max={:.1} iqr={:.1} whisker_hi={:.1} outliers=[{}]",
        b.min,
        b.q1,
        b.median,
        b.q3,
        b.max,
        b.iqr,
        b.whisker_hi,
        outliers.join(", ")
    )
}

/// Per-group box statistics over the valid rows of a table.
pub fn box_stats_by_group(
    records: &[TrialRecord],
    iqr_k: f64,
) -> Result<Vec<(FitnessGroup, BoxStats)>, StatsError> {
    let mut out = Vec::new();
    for group in FitnessGroup::ALL {
        let sts: Vec<f64> = records
            .iter()
            .filter(|r| r.group == group && r.status == TrialStatus::Valid)
            .filter_map(|r| r.st_ms.map(|v| v as f64))
            .collect();
        if !sts.is_empty() {
            out.push((group, BoxStats::from_data(&sts, iqr_k)?));
        }
    }
    if out.is_empty() {
        return Err(StatsError::EmptyGroup("no group has valid sensing times".into()));
    }
    Ok(out)
}

/// Renders the standalone box-stats document for the report subcommand.
pub fn render_box_doc(stats: &[(FitnessGroup, BoxStats)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sensing-time box statistics");
    for (group, b) in stats {
        let _ = writeln!(out, "{}", box_line(*group, b));
    }
    out
}
