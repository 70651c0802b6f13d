//! Descriptive statistics and goodness-of-fit checks used by experiments and tests.

use alloc::vec::Vec;
use libm::{exp, floor, log, sqrt};

use crate::special::{ln_norm_sf, norm_cdf};

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quantiles of unsorted data.
pub fn quantiles(data: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    qs.iter().map(|&q| quantile_sorted(&s, q)).collect()
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Sample variance with the `n - 1` divisor.
pub fn variance(data: &[f64]) -> f64 {
    let mu = mean(data);
    data.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (data.len() as f64 - 1.0)
}

/// Kolmogorov–Smirnov distance between the empirical cdf of `data` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = exp(-2.0 * kf * kf * x * x);
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic KS p-value with Stephens' finite-`n` correction.
pub fn ks_pvalue(n: usize, d: f64) -> f64 {
    ks_pvalue_effective(n as f64, d)
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    (d, ks_pvalue_effective(ne, d))
}

fn ks_pvalue_effective(ne: f64, d: f64) -> f64 {
    let rn = sqrt(ne);
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonDarling {
    pub a2: f64,
    /// `A²(1 + 0.75/n + 2.25/n²)`.
    pub a2_star: f64,
    pub p_value: f64,
}

/// Anderson–Darling test of normality with estimated mean and variance.
pub fn anderson_darling_normal(data: &[f64]) -> AndersonDarling {
    let n = data.len();
    let mu = mean(data);
    let sd = sqrt(variance(data));
    let mut z: Vec<f64> = data.iter().map(|x| (x - mu) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let lo = log(norm_cdf(z[i]));
        let hi = ln_norm_sf(z[n - 1 - i]);
        s += (2 * i + 1) as f64 * (lo + hi);
    }
    let a2 = -nf - s / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p_value = if a >= 0.6 {
        exp(1.2937 - 5.709 * a + 0.0186 * a * a)
    } else if a >= 0.34 {
        exp(0.9177 - 4.279 * a - 1.38 * a * a)
    } else if a >= 0.2 {
        1.0 - exp(-8.318 + 42.796 * a - 59.938 * a * a)
    } else {
        1.0 - exp(-13.436 + 101.14 * a - 223.73 * a * a)
    };
    AndersonDarling {
        a2,
        a2_star: a,
        p_value: p_value.clamp(0.0, 1.0),
    }
}
