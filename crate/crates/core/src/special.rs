//! Special functions: Gaussian tails, regularized incomplete gamma and beta.
//!
//! Tail quantities come in log form so that callers can push arguments far
//! beyond the range where the plain values underflow.

use libm::{erfc, exp, expm1, fabs, lgamma, log, log1p, sqrt};

pub const LN_2: f64 = core::f64::consts::LN_2;
/// `ln √(2π)`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// `√(2π)`
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const SQRT_2: f64 = core::f64::consts::SQRT_2;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    lgamma(x)
}

#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn ln_1m_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -LN_2 {
        log(-expm1(x))
    } else {
        log1p(-exp(x))
    }
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + log1p(exp(lo - hi))
}

#[inline]
pub fn norm_pdf(t: f64) -> f64 {
    exp(-0.5 * t * t) / SQRT_2PI
}

#[inline]
pub fn norm_sf(t: f64) -> f64 {
    0.5 * erfc(t / SQRT_2)
}

#[inline]
pub fn norm_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / SQRT_2)
}

/// `ln(1 - Φ(t))`, accurate in both tails.
pub fn ln_norm_sf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t < 0.0 {
        return log1p(-norm_sf(-t));
    }
    if t < 30.0 {
        return log(norm_sf(t));
    }
    if t == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    // Mills ratio continued fraction R(t) = 1/(t + 1/(t + 2/(t + ...))).
    let mut r = t;
    for j in (1..=60).rev() {
        r = t + j as f64 / r;
    }
    -0.5 * t * t - LN_SQRT_2PI - log(r)
}

/// Lower quantile `Φ^{-1}(p)` for `p <= 0.5`, accurate relative to `p`.
fn norm_ppf_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let x = if p < 0.02425 {
        let q = sqrt(-2.0 * log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // One Halley step brings the rational approximation to full precision.
    let e = norm_cdf(x) - p;
    let u = e * SQRT_2PI * exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Upper quantile: the `t` with `1 - Φ(t) = u`, for `u` in `(0, 1)`.
pub fn norm_isf(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::INFINITY;
    }
    if u >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if u <= 0.5 {
        -norm_ppf_lower(u)
    } else {
        norm_ppf_lower(1.0 - u)
    }
}

/// Upper quantile from `ln u`; valid far below the smallest double.
pub fn norm_isf_ln(ln_u: f64) -> f64 {
    if ln_u > -700.0 {
        return norm_isf(exp(ln_u));
    }
    if ln_u == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    // Newton on ln(1 - Φ(t)) = ln_u, starting from the leading asymptotic term.
    let l = -2.0 * ln_u;
    let mut t = sqrt(l - log(l) - 2.0 * LN_SQRT_2PI);
    for _ in 0..50 {
        let g = ln_norm_sf(t) - ln_u;
        let dg = -exp(-0.5 * t * t - LN_SQRT_2PI - ln_norm_sf(t));
        let step = g / dg;
        t -= step;
        if fabs(step) <= 1e-15 * t {
            break;
        }
    }
    t
}

/// Regularized incomplete gamma in log form: `(ln P(a, x), ln Q(a, x))`.
pub fn ln_gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if x == f64::INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_pref = a * log(x) - x - lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..100_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if fabs(del) < fabs(sum) * EPS {
                break;
            }
        }
        let ln_p = ln_pref + log(sum);
        (ln_p, ln_1m_exp(ln_p))
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if fabs(d) < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if fabs(c) < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if fabs(del - 1.0) < EPS {
                break;
            }
        }
        let ln_q = ln_pref + log(h);
        (ln_1m_exp(ln_q), ln_q)
    }
}

pub fn gamma_p(a: f64, x: f64) -> f64 {
    exp(ln_gamma_pq(a, x).0)
}

pub fn gamma_q(a: f64, x: f64) -> f64 {
    exp(ln_gamma_pq(a, x).1)
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta in log form: `(ln I_x(a, b), ln(1 - I_x(a, b)))`.
///
/// `y` must equal `1 - x`; passing it separately keeps precision when `x` is
/// close to 1.
pub fn ln_beta_inc(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if y <= 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_front = a * log(x) + b * log(y) - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let ln_i = ln_front + log(beta_cf(a, b, x)) - log(a);
        (ln_i, ln_1m_exp(ln_i))
    } else {
        let ln_j = ln_front + log(beta_cf(b, a, y)) - log(b);
        (ln_1m_exp(ln_j), ln_j)
    }
}
