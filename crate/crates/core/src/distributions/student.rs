//! Noncentral Student tails via conditioning on the normal numerator.
//!
//! For `T = (Z + θ)/√(U/k)` with `U ~ χ²_k` and `q > 0`:
//!
//! ```text
//! P(T >= q)  = ∫_0^∞ P(k/2, k z²/(2q²)) φ(z - θ) dz
//! P(T <= q)  = Φ(-θ) + ∫_0^∞ Q(k/2, k z²/(2q²)) φ(z - θ) dz
//! P(T <= -q) = ∫_0^∞ P(k/2, k w²/(2q²)) φ(w + θ) dw
//! P(T >= -q) = Φ(θ)  + ∫_0^∞ Q(k/2, k w²/(2q²)) φ(w + θ) dw
//! ```
//!
//! Every integrand is positive, so each tail keeps full relative accuracy.

use libm::{exp, log, sqrt};

use crate::quad::{integrate_pieces, Tolerance};
use crate::special::{ln_add_exp, ln_gamma_pq, ln_norm_sf, LN_SQRT_2PI};

#[derive(Clone, Copy)]
enum Part {
    Lower,
    Upper,
}

/// `ln ∫_0^∞ F(a, c z²) φ(z - s) dz` with `F` the lower or upper regularized gamma.
fn ln_mix(a: f64, c: f64, s: f64, part: Part) -> f64 {
    let ln_f = |z: f64| {
        if z <= 0.0 {
            return match part {
                Part::Lower => f64::NEG_INFINITY,
                Part::Upper => -0.5 * s * s - LN_SQRT_2PI,
            };
        }
        let (lp, lq) = ln_gamma_pq(a, c * z * z);
        let lg = match part {
            Part::Lower => lp,
            Part::Upper => lq,
        };
        lg - 0.5 * (z - s) * (z - s) - LN_SQRT_2PI
    };
    // Mode of z^{2a}·φ(z - s), which locates the peak when c is small.
    let z_pow = 0.5 * (s + sqrt(s * s + 8.0 * a));
    let top = s.max(z_pow).max(0.0) + 40.0;
    let mut off = f64::NEG_INFINITY;
    let mut arg = 0.0;
    for i in 0..=80 {
        let z = top * i as f64 / 80.0;
        let v = ln_f(z);
        if v > off {
            off = v;
            arg = z;
        }
    }
    if off == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut pts = [0.0, (arg - 8.0).max(0.0), arg, (arg + 8.0).min(top), top];
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = Tolerance {
        rel: 1e-13,
        abs: 0.0,
        max_intervals: 400,
    };
    let r = integrate_pieces(|z| exp(ln_f(z) - off), &pts, tol);
    off + log(r.value)
}

/// `ln P(T >= t)` for the noncentral Student with `k` degrees of freedom.
pub(crate) fn ln_sf(k: f64, theta: f64, t: f64) -> f64 {
    let a = 0.5 * k;
    if t == 0.0 {
        return ln_norm_sf(-theta);
    }
    let q = t.abs();
    let c = k / (2.0 * q * q);
    if t > 0.0 {
        ln_mix(a, c, theta, Part::Lower)
    } else {
        ln_add_exp(ln_norm_sf(-theta), ln_mix(a, c, -theta, Part::Upper))
    }
}

/// `ln P(T <= t)` for the noncentral Student with `k` degrees of freedom.
pub(crate) fn ln_cdf(k: f64, theta: f64, t: f64) -> f64 {
    let a = 0.5 * k;
    if t == 0.0 {
        return ln_norm_sf(theta);
    }
    let q = t.abs();
    let c = k / (2.0 * q * q);
    if t > 0.0 {
        ln_add_exp(ln_norm_sf(theta), ln_mix(a, c, theta, Part::Upper))
    } else {
        ln_mix(a, c, -theta, Part::Lower)
    }
}
