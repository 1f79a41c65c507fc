//! Distribution of the studentized range statistic.
//!
//! `P(Q <= q)` for `Q = R / S`, where `R` is the range of `k` independent
//! standard normals and `S^2` is an independent pooled variance estimate on
//! `df` degrees of freedom, is the double integral
//!
//! ```text
//!   CDF(q) = integral over s of  f_chi(s; df) * P_range(q * s; k) ds
//!   P_range(r; k) = k * integral over u of phi(u) * (Phi(u + r) - Phi(u))^(k-1) du
//! ```
//!
//! Both layers use adaptive Gauss-Legendre panels; the outer integral is
//! driven to an absolute tolerance of 1e-8. Quantiles are solved by bisection
//! on the CDF and memoized, since the Tukey confidence half-width re-uses the
//! same critical value for every pair.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::quad::adaptive_gl15;
use super::special::{ln_gamma, norm_cdf, norm_pdf};
use super::StatsError;

/// Absolute tolerance of the outer integral.
pub const CDF_ABS_TOL: f64 = 1e-8;

// phi(u) is below 1e-18 outside this window, and the range factor is <= 1.
const NORMAL_SUPPORT: f64 = 9.0;

/// P(range of k iid standard normals <= r).
fn normal_range_cdf(r: f64, k: u32) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let f = |u: f64| {
        let span = norm_cdf(u + r) - norm_cdf(u);
        norm_pdf(u) * span.powi(km1)
    };
    let (v, _) = adaptive_gl15(&f, -NORMAL_SUPPORT, NORMAL_SUPPORT, 1e-10);
    (k as f64 * v).clamp(0.0, 1.0)
}

// Density of S = sqrt(chi2_df / df) evaluated in log space.
fn scaled_chi_pdf(s: f64, df: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let half = df / 2.0;
    let ln = (1.0 - half) * std::f64::consts::LN_2 + half * df.ln() + (df - 1.0) * s.ln()
        - df * s * s / 2.0
        - ln_gamma(half);
    ln.exp()
}

/// CDF of the studentized range with `k` groups and `df` error degrees of
/// freedom, to an absolute tolerance of 1e-8.
pub fn studentized_range_cdf(q: f64, k: u32, df: f64) -> Result<f64, StatsError> {
    if k < 2 || df < 1.0 {
        return Err(StatsError::InvalidArgument(format!(
            "studentized range needs k >= 2 and df >= 1 (k={k}, df={df})"
        )));
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    // The scaled chi density has mean ~1 and sd ~1/sqrt(2 df); twelve sds
    // bound the support with tail mass far below the tolerance.
    let spread = 12.0 / (2.0 * df).sqrt();
    let s_lo = (1.0 - spread).max(0.0);
    let s_hi = 1.0 + spread.max(1.0);
    let f = |s: f64| scaled_chi_pdf(s, df) * normal_range_cdf(q * s, k);
    let (v, err) = adaptive_gl15(&f, s_lo, s_hi, CDF_ABS_TOL);
    if err > CDF_ABS_TOL {
        return Err(StatsError::NonConvergence {
            what: format!("studentized range cdf(q={q}, k={k}, df={df})"),
            achieved: err,
        });
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Upper-tail probability, as used for Tukey adjusted p-values.
pub fn studentized_range_sf(q: f64, k: u32, df: f64) -> Result<f64, StatsError> {
    Ok(1.0 - studentized_range_cdf(q, k, df)?)
}

type QuantileKey = (u64, u32, u64);

fn quantile_cache() -> &'static Mutex<HashMap<QuantileKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<QuantileKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Quantile of the studentized range: the q with `CDF(q) = p`.
///
/// Solved by bisection to ~1e-9 in q and memoized per (p, k, df); Tukey
/// interval construction calls this with the same arguments for every pair.
pub fn studentized_range_quantile(p: f64, k: u32, df: f64) -> Result<f64, StatsError> {
    if !(0.0..1.0).contains(&p) || p <= 0.0 {
        return Err(StatsError::InvalidArgument(format!(
            "studentized range quantile needs 0 < p < 1 (p={p})"
        )));
    }
    let key = (p.to_bits(), k, df.to_bits());
    if let Some(&q) = quantile_cache().lock().unwrap().get(&key) {
        return Ok(q);
    }
    let mut lo = 0.0;
    let mut hi = 4.0;
    while studentized_range_cdf(hi, k, df)? < p {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(StatsError::NonConvergence {
                what: "studentized range quantile bracket".into(),
                achieved: f64::INFINITY,
            });
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * hi.max(1.0) {
            break;
        }
    }
    let q = 0.5 * (lo + hi);
    quantile_cache().lock().unwrap().insert(key, q);
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::t_cdf;

    #[test]
    fn degenerate_arguments() {
        assert_eq!(studentized_range_cdf(0.0, 3, 10.0).unwrap(), 0.0);
        assert_eq!(studentized_range_cdf(-1.0, 3, 10.0).unwrap(), 0.0);
        assert!((studentized_range_cdf(200.0, 3, 10.0).unwrap() - 1.0).abs() < 1e-8);
        assert!(studentized_range_cdf(1.0, 1, 10.0).is_err());
        assert!(studentized_range_cdf(1.0, 3, 0.5).is_err());
    }

    #[test]
    fn monotone_in_q() {
        let mut prev = 0.0;
        for i in 1..=60 {
            let q = i as f64 * 0.2;
            let c = studentized_range_cdf(q, 4, 12.0).unwrap();
            assert!(c >= prev - 1e-12, "not monotone at q={q}");
            assert!((0.0..=1.0).contains(&c));
            prev = c;
        }
    }

    #[test]
    fn k2_reduces_to_student_t() {
        // Range of two normals over S: Q/sqrt(2) is |t| with df degrees of
        // freedom, so CDF(q) = 2 F_t(q/sqrt(2)) - 1.
        for &df in &[3.0, 10.0, 50.0] {
            for &q in &[0.5, 1.0, 2.0, 3.5, 5.0] {
                let got = studentized_range_cdf(q, 2, df).unwrap();
                let want = 2.0 * t_cdf(q / std::f64::consts::SQRT_2, df).unwrap() - 1.0;
                assert!((got - want).abs() < 5e-8, "k=2 q={q} df={df}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn matches_reference_cdf_values() {
        // Reference values from SciPy's studentized_range distribution.
        let refs = [
            (3.5, 3u32, 10.0, 0.922_896_689_161_589_6),
            (3.0, 3u32, 53.0, 0.904_847_621_549_125_3),
            (4.2, 5u32, 30.0, 0.957_273_461_779_862_6),
        ];
        for &(q, k, df, want) in &refs {
            let got = studentized_range_cdf(q, k, df).unwrap();
            assert!((got - want).abs() < 1e-6, "cdf({q},{k},{df}): {got} vs {want}");
        }
        let got = studentized_range_quantile(0.95, 3, 53.0).unwrap();
        assert!((got - 3.410_042_724_263_991).abs() < 1e-5, "q95(3,53)={got}");
    }

    #[test]
    fn matches_published_tukey_critical_values() {
        // Classic q_0.95 table entries (k, df, q): Harter's tables, 3 dp.
        let table = [
            (3u32, 10.0, 3.877),
            (3u32, 20.0, 3.578),
            (4u32, 12.0, 4.199),
            (5u32, 30.0, 4.102),
        ];
        for &(k, df, q95) in &table {
            let got = studentized_range_quantile(0.95, k, df).unwrap();
            assert!((got - q95).abs() < 2e-3, "q(0.95,{k},{df}): {got} vs {q95}");
            // And the CDF agrees at the tabled point.
            let c = studentized_range_cdf(q95, k, df).unwrap();
            assert!((c - 0.95).abs() < 1e-3);
        }
    }

    #[test]
    fn quantile_is_cached_and_consistent() {
        let a = studentized_range_quantile(0.95, 3, 53.0).unwrap();
        let b = studentized_range_quantile(0.95, 3, 53.0).unwrap();
        assert_eq!(a, b);
        let c = studentized_range_cdf(a, 3, 53.0).unwrap();
        assert!((c - 0.95).abs() < 1e-7);
    }
}
