//! Critical values of BH95, purity, and the reachable limit `π0`-bar.

use alloc::vec::Vec;
use libm::{exp, log};

use crate::distributions::Extended;
use crate::pvalues::MixtureModel;
use crate::roots::golden_min;

/// Numeric critical values below this are reported as 0.
pub const CRITICAL_FLOOR: f64 = 1e-8;

const PER_DECADE: usize = 50;
const DECADES: usize = 12;
const EXT_POINTS: usize = 100;
const LN_U_FLOOR: f64 = -1e4;
const STAT_CAP: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalityReport {
    pub alpha_star: f64,
    pub alpha_star_intrinsic: f64,
    pub g1_at_0: Extended,
    pub g1_at_1: f64,
    pub pi0_bar: f64,
    pub is_critical: bool,
    pub is_pure: bool,
}

/// `α* = 1/(π0 + (1 - π0)·g1(0))`, 0 when `g1(0)` is infinite.
pub fn critical_value_closed_form(model: &MixtureModel) -> f64 {
    let pi0 = model.pi0();
    if pi0 == 1.0 {
        return 1.0;
    }
    match model.g1_at_zero() {
        Extended::Infinite => 0.0,
        Extended::Finite(g) => 1.0 / (pi0 + (1.0 - pi0) * g),
    }
}

/// `π0 + (1 - π0)·g1(1)`.
pub fn pi0_bar(model: &MixtureModel) -> f64 {
    let pi0 = model.pi0();
    pi0 + (1.0 - pi0) * model.g1_at_one()
}

/// Grid infimum of `u/G(u)`, refined by golden section around the best cell.
///
/// The grid has 50 points per decade on `[1e-12, 1]`. It then continues,
/// uniformly in `ln(-ln u)`, down to `ln u = -10⁴` or until the null quantile
/// passes `1e15`, because for slowly diverging likelihood ratios the
/// infimum is only approached far below `1e-12`. Values below `1e-8` are
/// reported as 0.
pub fn critical_value_numeric(model: &MixtureModel) -> f64 {
    let raw = critical_value_infimum(model);
    if raw < CRITICAL_FLOOR {
        0.0
    } else {
        raw
    }
}

/// Unthresholded grid infimum of `u/G(u)`.
pub fn critical_value_infimum(model: &MixtureModel) -> f64 {
    if model.pi0() == 1.0 {
        return 1.0;
    }
    let ratio = |ln_u: f64| exp(ln_u - model.ln_mixture_cdf_ln(ln_u));
    let grid = ln_u_grid(model);
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &l) in grid.iter().enumerate() {
        let v = ratio(l);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let lo = grid[(best + 1).min(grid.len() - 1)];
    let hi = grid[best.saturating_sub(1)];
    if hi > lo {
        let (_, v) = golden_min(ratio, lo, hi, 1e-10 * (hi - lo).max(1e-300));
        best_val = best_val.min(v);
    }
    best_val
}

/// Grid of `ln u` values, decreasing from 0.
fn ln_u_grid(model: &MixtureModel) -> Vec<f64> {
    let step = core::f64::consts::LN_10 / PER_DECADE as f64;
    let n = PER_DECADE * DECADES;
    let mut grid: Vec<f64> = (0..=n).map(|i| -(i as f64) * step).collect();
    let s0 = log(n as f64 * step);
    let s1 = log(-LN_U_FLOOR);
    for j in 1..=EXT_POINTS {
        let l = -exp(s0 + (s1 - s0) * j as f64 / EXT_POINTS as f64);
        if model.family().f0_isf_ln(l - core::f64::consts::LN_2) > STAT_CAP {
            break;
        }
        grid.push(l);
    }
    grid
}

pub fn purity_report(model: &MixtureModel) -> CriticalityReport {
    let alpha_star = critical_value_closed_form(model);
    let g1_at_1 = model.g1_at_one();
    CriticalityReport {
        alpha_star,
        alpha_star_intrinsic: model.pi0() * alpha_star,
        g1_at_0: model.g1_at_zero(),
        g1_at_1,
        pi0_bar: pi0_bar(model),
        is_critical: alpha_star > 0.0,
        is_pure: g1_at_1 == 0.0,
    }
}
