//! Linear model of sensing time on fitness group and covariates, with
//! per-term F statistics from sequential (Type I) sums of squares.
//!
//! The design is, in order: intercept, two treatment-coded fitness
//! indicators (reference = first group level), speed, gaze distance,
//! time-to-collision, and the fitness x IGD x TTC product columns built from
//! the same two indicators. Term F values therefore depend on this listing
//! order, exactly like a sequential ANOVA table.

use crate::ingest::FitnessGroup;

use super::special::f_sf;
use super::StatsError;

/// One complete-covariate observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmRow {
    pub group: FitnessGroup,
    pub st_ms: f64,
    pub speed_kmh: f64,
    pub igd_px: f64,
    pub ttc_s: f64,
}

/// Per-term line of the sequential ANOVA table.
#[derive(Debug, Clone, PartialEq)]
pub struct TermAnova {
    pub name: &'static str,
    pub df: usize,
    pub sum_sq: f64,
    pub f: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmResult {
    pub terms: Vec<TermAnova>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_df: usize,
    pub residual_ss: f64,
    pub total_ss: f64,
}

const TERMS: [(&str, usize); 5] = [
    ("fitness", 2),
    ("speed", 1),
    ("igd", 1),
    ("ttc", 1),
    ("fitness:igd:ttc", 2),
];

fn design_row(row: &GlmRow) -> [f64; 8] {
    let fit = f64::from(row.group == FitnessGroup::Fit);
    let unfit = f64::from(row.group == FitnessGroup::Unfit);
    [
        1.0,
        fit,
        unfit,
        row.speed_kmh,
        row.igd_px,
        row.ttc_s,
        fit * row.igd_px * row.ttc_s,
        unfit * row.igd_px * row.ttc_s,
    ]
}

/// Ordinary least squares fit with sequential term tests.
pub fn fit_glm(rows: &[GlmRow]) -> Result<GlmResult, StatsError> {
    let n = rows.len();
    let p = 8;
    if n <= p {
        return Err(StatsError::TooFewPoints { needed: p + 1, got: n });
    }
    let y: Vec<f64> = rows.iter().map(|r| r.st_ms).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let total_ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if total_ss <= f64::EPSILON * mean.abs().max(1.0) {
        return Err(StatsError::DegenerateResponse);
    }
    let design: Vec<[f64; 8]> = rows.iter().map(design_row).collect();

    // RSS of each nested prefix model; prefix 0 is the intercept-only fit.
    let mut boundaries = vec![1usize];
    for (_, df) in TERMS {
        boundaries.push(boundaries.last().unwrap() + df);
    }
    let mut rss_chain = Vec::with_capacity(boundaries.len());
    let mut full: Option<LsFit> = None;
    for (idx, &cols) in boundaries.iter().enumerate() {
        let fit = least_squares(&design, &y, cols)?;
        rss_chain.push(fit.rss);
        if idx + 1 == boundaries.len() {
            full = Some(fit);
        }
    }
    let full = full.expect("full model fitted last");
    let residual_df = n - p;
    let resid_ms = full.rss / residual_df as f64;

    let mut terms = Vec::with_capacity(TERMS.len());
    for (i, (name, df)) in TERMS.into_iter().enumerate() {
        let sum_sq = (rss_chain[i] - rss_chain[i + 1]).max(0.0);
        let f = sum_sq / df as f64 / resid_ms;
        let p = f_sf(f, df as f64, residual_df as f64)?;
        terms.push(TermAnova { name, df, sum_sq, f, p });
    }
    Ok(GlmResult {
        terms,
        coefficients: full.coef,
        residuals: full.residuals,
        residual_df,
        residual_ss: full.rss,
        total_ss,
    })
}

struct LsFit {
    coef: Vec<f64>,
    residuals: Vec<f64>,
    rss: f64,
}

// Householder QR on the first `cols` design columns.
#[allow(clippy::needless_range_loop)]
fn least_squares(design: &[[f64; 8]], y: &[f64], cols: usize) -> Result<LsFit, StatsError> {
    let n = design.len();
    let mut a: Vec<Vec<f64>> = design.iter().map(|r| r[..cols].to_vec()).collect();
    let mut qty: Vec<f64> = y.to_vec();
    let mut col_scale = vec![0.0f64; cols];
    for (j, s) in col_scale.iter_mut().enumerate() {
        *s = design.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
    }
    for j in 0..cols {
        // Householder vector for column j below the diagonal.
        let norm = (j..n).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        if norm <= 1e-10 * col_scale[j].max(1.0) {
            return Err(StatsError::RankDeficientDesign { col: j });
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in j..cols {
                let dot: f64 = (j..n).map(|i| v[i - j] * a[i][c]).sum();
                let scale = 2.0 * dot / vnorm2;
                for i in j..n {
                    a[i][c] -= scale * v[i - j];
                }
            }
            let dot: f64 = (j..n).map(|i| v[i - j] * qty[i]).sum();
            let scale = 2.0 * dot / vnorm2;
            for i in j..n {
                qty[i] -= scale * v[i - j];
            }
        }
        a[j][j] = alpha;
        if a[j][j].abs() <= 1e-10 * col_scale[j].max(1.0) {
            return Err(StatsError::RankDeficientDesign { col: j });
        }
    }
    // Back substitution on the upper-triangular factor.
    let mut coef = vec![0.0f64; cols];
    for j in (0..cols).rev() {
        let mut s = qty[j];
        for c in j + 1..cols {
            s -= a[j][c] * coef[c];
        }
        coef[j] = s / a[j][j];
    }
    let residuals: Vec<f64> = design
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - row[..cols].iter().zip(&coef).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let rss = qty[cols..].iter().map(|x| x * x).sum();
    Ok(LsFit { coef, residuals, rss })
}
