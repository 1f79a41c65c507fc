//! Pearson product-moment correlation with a two-sided t test.

use super::special::t_two_sided_p;
use super::{mean_of, StatsError};

#[derive(Debug, Clone, PartialEq)]
pub struct PearsonResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<PearsonResult, StatsError> {
    let n = x.len();
    if n != y.len() {
        return Err(StatsError::InvalidArgument(format!(
            "length mismatch {n} vs {}",
            y.len()
        )));
    }
    if n < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: n });
    }
    let mx = mean_of(x);
    let my = mean_of(y);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        t_two_sided_p(t, df)?
    };
    Ok(PearsonResult { r, p, n })
}
