//! Welch's one-way ANOVA for groups with unequal variances.

use super::special::f_sf;
use super::{mean_of, sample_variance, StatsError};

#[derive(Debug, Clone, PartialEq)]
pub struct WelchResult {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub p: f64,
}

/// Welch (1951) test of equal means across `groups`.
///
/// Group i enters with weight n_i / s_i^2; the denominator degrees of freedom
/// follow the Welch-Satterthwaite approximation. Every group needs at least
/// two observations and nonzero variance.
pub fn welch_anova(groups: &[Vec<f64>]) -> Result<WelchResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::DegenerateCohort(format!(
            "Welch ANOVA needs at least 2 groups, got {k}"
        )));
    }
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut sizes = Vec::with_capacity(k);
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(StatsError::DegenerateGroup(format!(
                "group {i} has {} observations, need >= 2",
                g.len()
            )));
        }
        let var = sample_variance(g);
        if var <= 0.0 {
            return Err(StatsError::DegenerateGroup(format!(
                "group {i} has zero variance"
            )));
        }
        weights.push(g.len() as f64 / var);
        means.push(mean_of(g));
        sizes.push(g.len() as f64);
    }
    let w_sum: f64 = weights.iter().sum();
    let grand = weights
        .iter()
        .zip(&means)
        .map(|(w, m)| w * m)
        .sum::<f64>()
        / w_sum;
    let kf = k as f64;
    let between: f64 = weights
        .iter()
        .zip(&means)
        .map(|(w, m)| w * (m - grand) * (m - grand))
        .sum();
    let lambda: f64 = weights
        .iter()
        .zip(&sizes)
        .map(|(w, n)| {
            let r = 1.0 - w / w_sum;
            r * r / (n - 1.0)
        })
        .sum::<f64>()
        / (kf * kf - 1.0);
    let f = (between / (kf - 1.0)) / (1.0 + 2.0 * (kf - 2.0) * lambda);
    let df1 = kf - 1.0;
    let df2 = 1.0 / (3.0 * lambda);
    let p = f_sf(f, df1, df2)?;
    Ok(WelchResult { f, df1, df2, p })
}
