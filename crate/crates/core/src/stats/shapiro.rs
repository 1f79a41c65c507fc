//! Shapiro-Wilk W normality test.
//!
//! Royston's AS R94 approximation for uncensored samples of 3..=5000
//! observations: Blom-score weight vector with polynomial corrections for the
//! two smallest weights, then a normalizing transform of 1 - W to a normal
//! upper-tail p-value. Helper routines `alnorm` (AS 66) and `ppnd` (AS 111)
//! follow the published algorithms.

// Algorithm constants keep their published digit counts, and the W
// accumulation loops index the mirrored weight vector the way the published
// code does.
#![allow(clippy::excessive_precision, clippy::needless_range_loop)]

use super::StatsError;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapiroResult {
    pub w: f64,
    pub p: f64,
}

const C1: [f64; 6] = [0.0, 0.221_157, -0.147_981, -2.071_190, 4.434_685, -2.706_056];
const C2: [f64; 6] = [0.0, 0.042_981, -0.293_762, -1.752_461, 5.682_633, -3.582_633];
const C3: [f64; 4] = [0.5440, -0.399_78, 0.025_054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.778_57, 0.062_767, -0.002_032_2];
const C5: [f64; 4] = [-1.5861, -0.310_82, -0.083_751, 0.003_891_5];
const C6: [f64; 3] = [-0.4803, -0.082_676, 0.003_030_2];
const G: [f64; 2] = [-2.273, 0.459];
const P_TINY: f64 = 1e-19;

// Ascending-coefficient polynomial evaluation.
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Normal tail probability (Hill, AS 66): from x to infinity when `upper`,
/// from minus infinity to x otherwise.
fn alnorm(x: f64, upper: bool) -> f64 {
    let (mut up, mut z) = (upper, x);
    if z < 0.0 {
        up = !up;
        z = -z;
    }
    if z > 7.0 && !(up && z <= 38.0) {
        return if up { 0.0 } else { 1.0 };
    }
    let y = 0.5 * z * z;
    let temp = if z <= 1.28 {
        0.5 - z
            * (0.398_942_280_444
                - 0.399_903_438_504 * y
                    / (y + 5.758_854_804_58
                        - 29.821_355_780_8 / (y + 2.624_331_216_79 + 48.695_993_069_2 / (y + 5.928_857_244_38))))
    } else {
        0.398_942_280_385 * (-y).exp()
            / (z - 3.805_2e-8
                + 1.000_006_153_02
                    / (z + 3.980_647_94e-4
                        + 1.986_153_813_64
                            / (z - 0.151_679_116_635
                                + 5.293_303_249_26
                                    / (z + 4.838_591_280_8
                                        - 15.150_897_245_1
                                            / (z + 0.742_380_924_027
                                                + 30.789_933_034 / (z + 3.990_194_170_11))))))
    };
    if up {
        temp
    } else {
        1.0 - temp
    }
}

/// Normal quantile (Beasley & Springer, AS 111), as used when building the
/// AS R94 weight vector.
fn ppnd(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.42 {
        let r = q * q;
        return q
            * (((-25.441_060_496_37 * r + 41.391_197_735_34) * r - 18.615_000_625_29) * r
                + 2.506_628_238_84)
            / ((((3.130_829_098_33 * r - 21.062_241_018_26) * r + 23.083_367_437_43) * r
                - 8.473_510_930_90)
                * r
                + 1.0);
    }
    let mut r = p;
    if q > 0.0 {
        r = 1.0 - p;
    }
    if r <= 0.0 {
        return 0.0;
    }
    r = (-r.ln()).sqrt();
    let v = (((2.321_212_768_58 * r + 4.850_141_271_35) * r - 2.297_964_791_34) * r
        - 2.787_189_311_38)
        / ((1.637_067_818_97 * r + 3.543_889_247_62) * r + 1.0);
    if q < 0.0 {
        -v
    } else {
        v
    }
}

/// Shapiro-Wilk test of normality.
///
/// Sorts internally; the p-value is the probability of a W at least this far
/// below 1 under the normal null.
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroResult, StatsError> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::SampleSizeOutOfRange { n });
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range < 1e-19 {
        return Err(StatsError::ZeroRange);
    }
    let an = n as f64;
    let nn2 = n / 2;

    // Weight half-vector (negative half of the normalized expected order
    // statistics).
    let mut a = vec![0.0f64; nn2];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let an25 = an + 0.25;
        let mut summ2 = 0.0;
        for (i, ai) in a.iter_mut().enumerate() {
            *ai = ppnd((i as f64 + 1.0 - 0.375) / an25);
            summ2 += *ai * *ai;
        }
        summ2 *= 2.0;
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - a[0] / ssumm2;
        let (i1, fac) = if n > 5 {
            let a2 = -a[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for ai in a.iter_mut().skip(i1) {
            *ai = -*ai / fac;
        }
    }

    // W as the squared correlation between data and weights, accumulated in
    // the scaled form of the published algorithm.
    let full_weight = |i: usize| -> f64 {
        let j = n - 1 - i;
        if i == j {
            0.0
        } else if i < j {
            a[i]
        } else {
            -a[j]
        }
    };
    let mut sx = 0.0;
    let mut sa = 0.0;
    for i in 0..n {
        sx += x[i] / range;
        sa += full_weight(i);
    }
    sa /= an;
    sx /= an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let asa = full_weight(i) - sa;
        let xsx = x[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    if n == 3 {
        if w < 0.75 {
            return Ok(ShapiroResult { w: 0.75, p: 0.0 });
        }
        let p = 1.0 - 6.0 / std::f64::consts::PI * w.sqrt().acos();
        return Ok(ShapiroResult { w, p });
    }

    let y = w1.ln();
    let p = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            P_TINY
        } else {
            let y = -(gamma - y).ln();
            let m = poly(&C3, an);
            let s = poly(&C4, an).exp();
            alnorm((y - m) / s, true)
        }
    } else {
        let xx = an.ln();
        let m = poly(&C5, xx);
        let s = poly(&C6, xx).exp();
        alnorm((y - m) / s, true)
    };
    Ok(ShapiroResult { w, p })
}
