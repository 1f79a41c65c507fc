//! Tukey-Kramer honest significant difference post hoc test.

use super::srange::{studentized_range_quantile, studentized_range_sf};
use super::{mean_of, StatsError};

/// One pairwise comparison: `later` minus `earlier` in group-level order.
#[derive(Debug, Clone, PartialEq)]
pub struct TukeyRow {
    pub group_a: String,
    pub group_b: String,
    pub diff: f64,
    pub lwr: f64,
    pub upr: f64,
    pub p_adj: f64,
}

/// All-pairs comparison against the pooled one-way mean square error.
///
/// Groups are compared in their given order: the row for pair (j, i) with
/// j > i reports mean_j - mean_i, matching the convention where the first
/// level acts as the reference. Unequal sizes use the Kramer adjustment.
pub fn tukey_hsd(
    labels: &[String],
    groups: &[Vec<f64>],
    conf_level: f64,
) -> Result<Vec<TukeyRow>, StatsError> {
    let k = groups.len();
    if k < 2 || labels.len() != k {
        return Err(StatsError::DegenerateCohort(format!(
            "Tukey HSD needs >= 2 labeled groups, got {k}"
        )));
    }
    if !(0.0 < conf_level && conf_level < 1.0) {
        return Err(StatsError::InvalidArgument(format!(
            "confidence level {conf_level}"
        )));
    }
    let n_total: usize = groups.iter().map(Vec::len).sum();
    if n_total <= k {
        return Err(StatsError::DegenerateGroup(
            "no residual degrees of freedom for the pooled fit".into(),
        ));
    }
    let mut sse = 0.0;
    let mut means = Vec::with_capacity(k);
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(StatsError::DegenerateGroup(format!(
                "group {} has {} observations, need >= 2",
                labels[i],
                g.len()
            )));
        }
        let m = mean_of(g);
        sse += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
        means.push(m);
    }
    let df = (n_total - k) as f64;
    let mse = sse / df;
    if mse <= 0.0 {
        return Err(StatsError::DegenerateGroup(
            "pooled mean square error is zero".into(),
        ));
    }
    let q_crit = studentized_range_quantile(conf_level, k as u32, df)?;
    let mut rows = Vec::with_capacity(k * (k - 1) / 2);
    for j in 1..k {
        for i in 0..j {
            let diff = means[j] - means[i];
            let se = (mse / 2.0 * (1.0 / groups[j].len() as f64 + 1.0 / groups[i].len() as f64))
                .sqrt();
            let p_adj = if diff == 0.0 {
                1.0
            } else {
                studentized_range_sf(diff.abs() / se, k as u32, df)?
            };
            let half = q_crit * se;
            rows.push(TukeyRow {
                group_a: labels[j].clone(),
                group_b: labels[i].clone(),
                diff,
                lwr: diff - half,
                upr: diff + half,
                p_adj,
            });
        }
    }
    Ok(rows)
}
