//! Cohort statistics: validity filtering, group summaries, Welch's ANOVA,
//! Tukey HSD, a sequential-SS linear model, Shapiro-Wilk, and Pearson
//! correlations, on top of in-crate special functions.

pub mod glm;
pub mod pearson;
pub mod quad;
pub mod shapiro;
pub mod special;
pub mod srange;
pub mod tukey;
pub mod welch;

mod battery;

pub use battery::{run_battery, GroupBlock, StatBattery};
pub use glm::{fit_glm, GlmResult, GlmRow, TermAnova};
pub use pearson::{pearson_r, PearsonResult};
pub use shapiro::{shapiro_wilk, ShapiroResult};
pub use srange::{studentized_range_cdf, studentized_range_quantile, studentized_range_sf};
pub use tukey::{tukey_hsd, TukeyRow};
pub use welch::{welch_anova, WelchResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty data")]
    EmptyData,
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("group {0} has no valid observations")]
    EmptyGroup(String),
    #[error("degenerate group: {0}")]
    DegenerateGroup(String),
    #[error("degenerate cohort: {0}")]
    DegenerateCohort(String),
    #[error("design matrix is rank deficient at column {col}")]
    RankDeficientDesign { col: usize },
    #[error("trial {trial} is missing covariate {name}")]
    MissingCovariate { name: &'static str, trial: String },
    #[error("response has no variance")]
    DegenerateResponse,
    #[error("sample size {n} outside supported range 3..=5000")]
    SampleSizeOutOfRange { n: usize },
    #[error("zero variance input")]
    ZeroVariance,
    #[error("input has zero range")]
    ZeroRange,
    #[error("{what} did not converge (achieved tolerance {achieved:e})")]
    NonConvergence { what: String, achieved: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Linear-interpolation quantile at position 1 + q(n-1) of the order
/// statistics (type 7, the default of common statistical environments).
pub fn quantile(data: &[f64], q: f64) -> Result<f64, StatsError> {
    if data.is_empty() {
        return Err(StatsError::EmptyData);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(StatsError::InvalidArgument(format!("quantile q={q}")));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-group box plot statistics with one-sided high outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    /// Largest value not flagged as an outlier (upper whisker end).
    pub whisker_hi: f64,
    /// Values above q3 + k*iqr, ascending.
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn from_data(data: &[f64], iqr_k: f64) -> Result<Self, StatsError> {
        if data.is_empty() {
            return Err(StatsError::EmptyData);
        }
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let cutoff = q3 + iqr_k * iqr;
        // Outliers are the ascending tail above the cutoff; q3 itself never
        // exceeds it, so at least one value is always kept.
        let split = sorted.partition_point(|&x| x <= cutoff);
        let outliers = sorted[split..].to_vec();
        Ok(BoxStats {
            min: sorted[0],
            q1,
            median: quantile_sorted(&sorted, 0.5),
            q3,
            max: *sorted.last().unwrap(),
            iqr,
            whisker_hi: sorted[split - 1],
            outliers,
        })
    }
}

/// Splits values into (kept, missed): a value of `max_st_ms` or above counts
/// as a miss ("below" is strict).
pub fn miss_filter(sts: &[f64], max_st_ms: f64) -> (Vec<f64>, Vec<f64>) {
    let mut kept = Vec::new();
    let mut missed = Vec::new();
    for &x in sts {
        if x < max_st_ms {
            kept.push(x);
        } else {
            missed.push(x);
        }
    }
    (kept, missed)
}

/// One-sided interquartile-range rule: values strictly above q3 + k*iqr are
/// removed. Requires at least four points for a meaningful quartile spread.
pub fn iqr_outlier_filter(sts: &[f64], k: f64) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    if sts.len() < 4 {
        return Err(StatsError::TooFewPoints {
            needed: 4,
            got: sts.len(),
        });
    }
    let mut sorted = sts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let cutoff = q3 + k * (q3 - q1);
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for &x in sts {
        if x > cutoff {
            removed.push(x);
        } else {
            kept.push(x);
        }
    }
    Ok((kept, removed))
}

/// Range, mean, Bessel-corrected SD, and median of one group's values.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
}

pub fn group_summary(values: &[f64]) -> Result<GroupSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyData);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(GroupSummary {
        n,
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        sd,
        median: quantile_sorted(&sorted, 0.5),
    })
}

pub(crate) fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    let m = mean_of(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (values.len() - 1) as f64
}
