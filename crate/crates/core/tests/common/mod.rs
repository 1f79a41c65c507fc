//! Shared oracle machinery for the integration suites: exact rational
//! linear algebra for normal-equation fits, plus fixture data. Everything
//! here is deliberately independent of the implementation paths it checks.

// Matrix elimination reads most naturally with explicit indices.
#![allow(clippy::needless_range_loop)]

use num::rational::BigRational;
use num::{BigInt, ToPrimitive, Zero};

pub fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn qi(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("fits in f64")
}

/// Exact Gauss-Jordan solve of `a x = b`. Returns None when singular.
pub fn solve_exact(
    mut a: Vec<Vec<BigRational>>,
    mut b: Vec<BigRational>,
) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col].clone();
        for c in 0..n {
            a[col][c] /= d.clone();
        }
        b[col] /= d;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                let t = a[col][c].clone() * f.clone();
                a[r][c] -= t;
            }
            let t = b[col].clone() * f;
            b[r] -= t;
        }
    }
    Some(b)
}

/// Exact least squares via the normal equations on the first `cols` columns:
/// returns (coefficients, residual sum of squares).
pub fn ols_exact(
    design: &[Vec<BigRational>],
    y: &[BigRational],
    cols: usize,
) -> (Vec<BigRational>, BigRational) {
    let n = design.len();
    let mut xtx = vec![vec![BigRational::zero(); cols]; cols];
    let mut xty = vec![BigRational::zero(); cols];
    for i in 0..n {
        for r in 0..cols {
            for c in r..cols {
                let t = design[i][r].clone() * design[i][c].clone();
                xtx[r][c] += t;
            }
            let t = design[i][r].clone() * y[i].clone();
            xty[r] += t;
        }
    }
    for r in 0..cols {
        for c in 0..r {
            xtx[r][c] = xtx[c][r].clone();
        }
    }
    let beta = solve_exact(xtx, xty.clone()).expect("full-rank fixture");
    let mut rss = y.iter().map(|v| v.clone() * v.clone()).sum::<BigRational>();
    for (b, xy) in beta.iter().zip(&xty) {
        rss -= b.clone() * xy.clone();
    }
    (beta, rss)
}

pub fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(1e-12)
}
