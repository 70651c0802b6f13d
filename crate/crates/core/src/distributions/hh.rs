use libm::{exp, log, sqrt};

use crate::special::{ln_norm_sf, LN_SQRT_2PI};
use crate::{Error, Result};

const Z_MAX: f64 = 40.0;

/// `ln Hh_k(z)` where `Hh_k(z) = ∫_0^∞ x^k/k! · exp(-(x+z)²/2) dx` and
/// `Hh_{-1}(z) = exp(-z²/2)`.
///
/// Upward recurrence `k·Hh_k = Hh_{k-2} - z·Hh_{k-1}` is used where it is
/// stable (`z <= 0`, or `z` small against `√k`). Otherwise `Hh_k(z)` is the
/// minimal solution of the recurrence and is computed by backward (Miller)
/// recurrence normalized with `Hh_0(z) = √(2π)·(1 - Φ(z))`.
pub fn ln_hh(k: i32, z: f64) -> Result<f64> {
    if k < -1 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "Hh_k requires k >= -1",
        });
    }
    if !(z.abs() <= Z_MAX) {
        return Err(Error::Domain {
            what: "Hh_k requires |z| <= 40",
            value: z,
        });
    }
    if k == -1 {
        return Ok(-0.5 * z * z);
    }
    let ln_h0 = LN_SQRT_2PI + ln_norm_sf(z);
    if k == 0 {
        return Ok(ln_h0);
    }
    if z <= 0.0 || 2.0 * z * sqrt(k as f64 + 1.0) <= 10.0 {
        Ok(forward(k, z, ln_h0))
    } else {
        Ok(backward(k, z, ln_h0))
    }
}

pub fn hh(k: i32, z: f64) -> Result<f64> {
    ln_hh(k, z).map(exp)
}

fn forward(k: i32, z: f64, ln_h0: f64) -> f64 {
    let mut scale = ln_h0;
    let mut prev = exp(-0.5 * z * z - ln_h0);
    let mut cur = 1.0;
    for n in 1..=k {
        let next = (prev - z * cur) / n as f64;
        prev = cur;
        cur = next;
        if !(1e-200..=1e200).contains(&cur) {
            prev /= cur;
            scale += log(cur);
            cur = 1.0;
        }
    }
    scale + log(cur)
}

fn backward(k: i32, z: f64, ln_h0: f64) -> f64 {
    let r = sqrt(k as f64) + 12.0 / z + 6.0;
    let n_top = (r * r) as i32 + k;
    // y_{m-1} = (m+1)·y_{m+1} + z·y_m, started from y_{N+1} = 0, y_N = 1.
    let mut upper = 0.0;
    let mut cur = 1.0;
    let mut scale = 0.0;
    let mut ln_yk = 0.0;
    for m in (1..=n_top).rev() {
        let lower = (m + 1) as f64 * upper + z * cur;
        upper = cur;
        cur = lower;
        if cur > 1e200 {
            upper /= cur;
            scale += log(cur);
            cur = 1.0;
        }
        if m - 1 == k {
            ln_yk = log(cur) + scale;
        }
    }
    let ln_y0 = log(cur) + scale;
    ln_h0 + ln_yk - ln_y0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_pieces, Tolerance};
    use crate::special::ln_gamma;

    /// `ln Hh_k(z)` by direct quadrature of the defining integral.
    fn ln_hh_quad(k: i32, z: f64) -> f64 {
        let kf = k as f64;
        let peak = 0.5 * (-z + (z * z + 4.0 * kf).sqrt());
        let ln_f = |x: f64| kf * x.ln() - ln_gamma(kf + 1.0) - 0.5 * (x + z) * (x + z);
        let off = if k == 0 { ln_f(peak.max(0.0)).max(-0.5 * z * z) } else { ln_f(peak) };
        let tol = Tolerance {
            rel: 1e-13,
            ..Tolerance::default()
        };
        let pts = [0.0, peak, peak + 60.0];
        let f = |x: f64| if x <= 0.0 && k > 0 { 0.0 } else { (ln_f(x) - off).exp() };
        integrate_pieces(f, &pts, tol).value.ln() + off
    }

    #[test]
    fn small_closed_forms() {
        assert!((hh(0, 0.0).unwrap() - (core::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
        assert!((hh(1, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((hh(-1, 1.5).unwrap() - (-1.125f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn reference_values_k36() {
        let cases = [
            (-2.5, 6.256_619_912_462_616e-16),
            (0.0, 7.467_564_738_230_093e-22),
            (2.5, 3.834_858_091_401_519e-29),
        ];
        for (z, want) in cases {
            let got = hh(36, z).unwrap();
            assert!(((got - want) / want).abs() < 1e-12, "z = {z}: {got} vs {want}");
        }
    }

    #[test]
    fn agrees_with_quadrature() {
        for k in [0, 1, 2, 5, 9, 20, 36, 50, 120, 200] {
            for &z in &[-40.0, -10.0, -3.0, -0.5, 0.0, 0.1, 0.7, 2.0, 5.0, 10.0, 25.0, 40.0] {
                let got = ln_hh(k, z).unwrap();
                let want = ln_hh_quad(k, z);
                assert!(
                    (got - want).abs() < 1e-10,
                    "k = {k}, z = {z}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(hh(-2, 0.0).is_err());
        assert!(hh(3, 40.5).is_err());
        assert!(hh(3, -41.0).is_err());
        assert!(hh(3, f64::NAN).is_err());
    }
}
