//! One-dimensional root finding and minimization.

use libm::{fabs, sqrt};

/// Root of a decreasing function `g` on `[lo, hi]` with `g(lo) >= 0 >= g(hi)`,
/// using Newton steps (derivative `dg`) safeguarded by bisection.
pub fn newton_decreasing<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64, x0: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0.clamp(lo, hi);
    for _ in 0..300 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let mut next = x - gx / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            // Geometric midpoint when the bracket spans decades.
            next = if lo > 0.0 && hi > 4.0 * lo {
                sqrt(lo * hi)
            } else {
                0.5 * (lo + hi)
            };
        }
        if fabs(next - x) <= 4e-16 * fabs(x).max(1e-300) || hi - lo <= 4e-16 * fabs(hi) {
            return next;
        }
        x = next;
    }
    x
}

/// Bisection for a sign change of `h` on `[lo, hi]` where `h(lo)` and `h(hi)`
/// have opposite signs (as judged by `positive`). Stops at width `tol`.
pub fn bisect<H, P>(h: H, positive: P, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    H: Fn(f64) -> f64,
    P: Fn(f64, f64) -> bool,
{
    let lo_pos = positive(lo, h(lo));
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if positive(mid, h(mid)) == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if fabs(b - a) <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_cube_root() {
        let r = newton_decreasing(|x| 2.0 - x * x * x, |x| -3.0 * x * x, 0.0, 10.0, 9.0);
        assert!((r - 2f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, _) = golden_min(|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn bisect_brackets_root() {
        let (lo, hi) = bisect(|x| x - 0.25, |_, v| v > 0.0, 0.0, 1.0, 1e-14);
        assert!(lo <= 0.25 && hi >= 0.25 && hi - lo <= 1e-14);
    }
}
