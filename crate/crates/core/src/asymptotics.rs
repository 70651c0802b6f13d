//! Large-`m` limits of BH95 and plug-in procedures.

use alloc::vec::Vec;
use libm::{exp, log};

use crate::criticality::{critical_value_closed_form, pi0_bar};
use crate::pvalues::{LabelMode, MixtureModel};
use crate::roots::bisect;
use crate::{Error, Result};

const GRID_POINTS: usize = 10_000;
const LN_T_MIN: f64 = -690.0;
/// A log-gap above this counts as `G(t) >= c·t/α`.
const CROSS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPrediction {
    pub alpha: f64,
    /// 1 for BH95, `π0`-bar for plug-in procedures.
    pub pi0_ref: f64,
    pub t_star: f64,
    pub rho_inf: f64,
    pub pi_inf: f64,
    /// `None` when the procedure is critical at `alpha`.
    pub fdp_limit: Option<f64>,
    /// Variance of the `√(m·h)`-scaled FDP fluctuation (plug-in only).
    pub fdp_scaled_variance: Option<f64>,
    pub bandwidth: Option<BandwidthCheck>,
}

/// The limit law assumes `h_m = o(1/ln ln m)`; this records how far a
/// concrete `(m, h)` pair is from that regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthCheck {
    pub m: usize,
    pub h: f64,
    /// `h·ln ln m`.
    pub metric: f64,
    pub warning: bool,
}

/// Bandwidths with `h·ln ln m` above this are flagged.
pub const BANDWIDTH_WARN: f64 = 0.5;

impl BandwidthCheck {
    pub fn new(m: usize, h: f64) -> Self {
        let lnln = log(log(m as f64).max(1.0));
        let metric = h * lnln;
        BandwidthCheck {
            m,
            h,
            metric,
            warning: metric > BANDWIDTH_WARN,
        }
    }
}

/// `ln G` cached on a geometric grid in `t`, for repeated crossing searches.
#[derive(Debug, Clone)]
pub struct CrossingTable<'a> {
    model: &'a MixtureModel,
    ln_t: Vec<f64>,
    /// `ln G(t) - ln t` at each grid point; nondecreasing as `t` falls when `G` is concave.
    gap: Vec<f64>,
}

impl<'a> CrossingTable<'a> {
    pub fn new(model: &'a MixtureModel) -> Self {
        let ln_t: Vec<f64> = (0..GRID_POINTS)
            .map(|i| LN_T_MIN * i as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let gap = ln_t
            .iter()
            .map(|&l| model.ln_mixture_cdf_ln(l) - l)
            .collect();
        CrossingTable { model, ln_t, gap }
    }

    pub fn model(&self) -> &MixtureModel {
        self.model
    }

    /// Rightmost `t` in `[0, 1]` with `G(t) >= pi0_ref·t/α`, 0 if only `t = 0` qualifies.
    pub fn t_star(&self, alpha: f64, pi0_ref: f64) -> Result<f64> {
        check_unit("alpha", alpha)?;
        check_unit("pi0_ref", pi0_ref)?;
        if pi0_ref <= alpha {
            return Ok(1.0);
        }
        let level = log(pi0_ref / alpha);
        let Some(i) = self.gap.iter().position(|&g| g - level > CROSS_EPS) else {
            return Ok(0.0);
        };
        if i == 0 {
            return Ok(1.0);
        }
        let h = |t: f64| self.model.ln_mixture_cdf_ln(log(t)) - log(t) - level;
        let lo = exp(self.ln_t[i]);
        let hi = exp(self.ln_t[i - 1]);
        let (a, b) = bisect(h, |_, v| v > CROSS_EPS, lo, hi, 1e-13 * hi);
        Ok(0.5 * (a + b))
    }

    pub fn predict(&self, alpha: f64) -> Result<AsymptoticPrediction> {
        let model = self.model;
        let t = self.t_star(alpha, 1.0)?;
        let critical = t == 0.0;
        Ok(AsymptoticPrediction {
            alpha,
            pi0_ref: 1.0,
            t_star: t,
            rho_inf: model.mixture_cdf(t),
            pi_inf: if model.pi0() < 1.0 { model.g1_cdf(t) } else { 0.0 },
            fdp_limit: (!critical).then(|| model.pi0() * alpha),
            fdp_scaled_variance: None,
            bandwidth: None,
        })
    }

    /// Plug-in limits; `v` is the asymptotic variance function of the `π0`
    /// estimator evaluated at `π0`-bar (`v(x) = x` for Storey-type estimators).
    pub fn predict_plug_in<V: Fn(f64) -> f64>(
        &self,
        alpha: f64,
        check: Option<BandwidthCheck>,
        v: V,
    ) -> Result<AsymptoticPrediction> {
        let model = self.model;
        let bar = pi0_bar(model);
        let bound = bar * critical_value_closed_form(model);
        check_unit("alpha", alpha)?;
        if alpha <= bound {
            return Err(Error::CriticalRegime { alpha, bound });
        }
        let t = self.t_star(alpha, bar)?;
        let fdp = model.pi0() * alpha / bar;
        Ok(AsymptoticPrediction {
            alpha,
            pi0_ref: bar,
            t_star: t,
            rho_inf: model.mixture_cdf(t),
            pi_inf: if model.pi0() < 1.0 { model.g1_cdf(t) } else { 0.0 },
            fdp_limit: Some(fdp),
            fdp_scaled_variance: Some(fdp * fdp * v(bar) / (bar * bar)),
            bandwidth: check,
        })
    }

    /// First-order changes of `(τ̂, ν̂, ρ̂)` when the `π0` estimate sits
    /// `deviation` above `π0`-bar.
    pub fn predict_tvr_deltas(&self, alpha: f64, deviation: f64) -> Result<(f64, f64, f64)> {
        let model = self.model;
        let bar = pi0_bar(model);
        let bound = bar * critical_value_closed_form(model);
        check_unit("alpha", alpha)?;
        if alpha <= bound {
            return Err(Error::CriticalRegime { alpha, bound });
        }
        let t = self.t_star(alpha, bar)?;
        let g = model.mixture_pdf(t);
        let denom = g - bar / alpha;
        if !(denom.abs() >= 1e-12) {
            return Err(Error::DegenerateDenominator { value: denom });
        }
        let f = (t / alpha) / denom * deviation;
        Ok((f, f * model.pi0(), f * g))
    }
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidParameter {
            name,
            value: x,
            reason: "must lie in (0, 1]",
        });
    }
    Ok(())
}

pub fn t_star(model: &MixtureModel, alpha: f64, pi0_ref: f64) -> Result<f64> {
    CrossingTable::new(model).t_star(alpha, pi0_ref)
}

pub fn predict(model: &MixtureModel, alpha: f64) -> Result<AsymptoticPrediction> {
    CrossingTable::new(model).predict(alpha)
}

pub fn predict_plug_in<V: Fn(f64) -> f64>(
    model: &MixtureModel,
    alpha: f64,
    check: Option<BandwidthCheck>,
    v: V,
) -> Result<AsymptoticPrediction> {
    CrossingTable::new(model).predict_plug_in(alpha, check, v)
}

pub fn predict_tvr_deltas(model: &MixtureModel, alpha: f64, deviation: f64) -> Result<(f64, f64, f64)> {
    CrossingTable::new(model).predict_tvr_deltas(alpha, deviation)
}

/// Storey-type variance function `v(x) = x`.
pub fn storey_variance(x: f64) -> f64 {
    x
}

/// Limit variance of `√m·(FDP - π0·α/π0-bar)` for the plug-in procedure with
/// Storey's estimator at a fixed `λ`.
///
/// At fixed `λ` the estimator noise and the empirical process at `t*` are of
/// the same order, so both enter:
/// `√m·ΔFDP ≈ (α/π̄)·(π0·W(λ)/(π̄(1-λ)) + W0(t*)/t*)`, where `W` is the
/// empirical process of all p-values and `W0` its null part.
pub fn fixed_lambda_fdp_variance(
    model: &MixtureModel,
    alpha: f64,
    lambda: f64,
    labels: LabelMode,
) -> Result<f64> {
    let pi0 = model.pi0();
    let bar = pi0_bar(model);
    let t = CrossingTable::new(model).t_star(alpha, bar)?;
    if t == 0.0 {
        return Err(Error::CriticalRegime {
            alpha,
            bound: bar * critical_value_closed_form(model),
        });
    }
    let g1l = model.g1_cdf(lambda);
    let gl = model.mixture_cdf(lambda);
    let (var_w, var_w0, cov) = match labels {
        LabelMode::Deterministic => (
            pi0 * lambda * (1.0 - lambda) + (1.0 - pi0) * g1l * (1.0 - g1l),
            pi0 * t * (1.0 - t),
            pi0 * (lambda.min(t) - lambda * t),
        ),
        LabelMode::Bernoulli => (
            gl * (1.0 - gl),
            pi0 * t - pi0 * pi0 * t * t,
            pi0 * lambda.min(t) - gl * pi0 * t,
        ),
    };
    let a = pi0 / (bar * (1.0 - lambda));
    let b = 1.0 / t;
    let s = alpha / bar;
    Ok(s * s * (a * a * var_w + b * b * var_w0 + 2.0 * a * b * cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::AlternativeFamily;
    use crate::pvalues::Sidedness;

    fn model(f: AlternativeFamily, pi0: f64, s: Sidedness) -> MixtureModel {
        MixtureModel::new(pi0, f, s).unwrap()
    }

    fn laplace(pi0: f64) -> MixtureModel {
        model(AlternativeFamily::laplace(2.0).unwrap(), pi0, Sidedness::OneSided)
    }

    #[test]
    fn pure_null_never_rejects() {
        let m = model(AlternativeFamily::gaussian(2.0).unwrap(), 1.0, Sidedness::OneSided);
        assert_eq!(t_star(&m, 0.3, 1.0).unwrap(), 0.0);
        assert_eq!(t_star(&m, 1.0, 1.0).unwrap(), 1.0);
        let p = predict(&m, 0.3).unwrap();
        assert_eq!((p.rho_inf, p.pi_inf, p.fdp_limit), (0.0, 0.0, None));
    }

    #[test]
    fn laplace_subcritical() {
        let m = laplace(0.75);
        assert_eq!(t_star(&m, 0.3, 1.0).unwrap(), 0.0);
        let a = critical_value_closed_form(&laplace(0.9));
        let p = predict(&laplace(0.9), a - 0.01).unwrap();
        assert_eq!((p.t_star, p.rho_inf, p.pi_inf), (0.0, 0.0, 0.0));
        // At α* exactly the sub-critical branch is reported.
        assert_eq!(t_star(&laplace(0.5), critical_value_closed_form(&laplace(0.5)), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_crossing_by_bisection() {
        let m = model(AlternativeFamily::gaussian(2.0).unwrap(), 0.75, Sidedness::OneSided);
        let t = t_star(&m, 0.2, 1.0).unwrap();
        // Independent oracle: plain bisection of G(t) - t/α from the right.
        let h = |t: f64| m.mixture_cdf(t) - t / 0.2;
        let (mut lo, mut hi) = (1e-12, 1.0);
        assert!(h(lo) > 0.0 && h(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((t - lo).abs() < 1e-10, "{t} vs {lo}");
        assert!(h(t).abs() < 1e-9);
    }

    #[test]
    fn laplace_kink() {
        // π0 = 0: G = G1 and the crossing sits at the end of the linear branch e^θ·u.
        let m = laplace(0.0);
        let alpha = 0.2;
        let t = t_star(&m, alpha, 1.0).unwrap();
        let e = (-2f64).exp();
        // Middle branch G1(u) = 1 - e^{-θ}/(4u); root of that = u/α.
        let oracle = (alpha + (alpha * alpha - alpha * e).sqrt()) / 2.0;
        assert!(oracle > e / 2.0 && oracle < 0.5);
        assert!((t - oracle).abs() < 1e-10, "{t} vs {oracle}");
    }

    #[test]
    fn power_identity() {
        let m = model(AlternativeFamily::gaussian(2.0).unwrap(), 0.75, Sidedness::TwoSided);
        let tab = CrossingTable::new(&m);
        let mut prev = 0.0;
        for i in 1..=10 {
            let a = 0.05 * i as f64;
            let p = tab.predict(a).unwrap();
            assert!(p.pi_inf > prev);
            prev = p.pi_inf;
            assert!((p.pi_inf * 0.25 - p.rho_inf * (1.0 - 0.75 * a)).abs() < 1e-9);
        }
    }

    #[test]
    fn plug_in_laplace_values() {
        let m = laplace(0.5);
        let p = predict_plug_in(&m, 0.45, None, storey_variance).unwrap();
        assert!((p.fdp_limit.unwrap() - 0.396_358_685_090_047_07).abs() < 1e-14);
        assert!((p.fdp_scaled_variance.unwrap() - 0.276_746_806_984_541_1).abs() < 1e-12);
        assert!((p.pi0_ref - 0.567_667_641_618_306_4).abs() < 1e-15);
        let bound = pi0_bar(&m) * critical_value_closed_form(&m);
        assert!(matches!(
            predict_plug_in(&m, bound * 0.99, None, storey_variance),
            Err(Error::CriticalRegime { .. })
        ));
        // Pure models give FDP limit α.
        let g = model(AlternativeFamily::gaussian(2.0).unwrap(), 0.6, Sidedness::OneSided);
        let p = predict_plug_in(&g, 0.1, None, storey_variance).unwrap();
        assert!((p.fdp_limit.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn fixed_lambda_variance_reference() {
        // Closed form on the linear branch of one-sided Laplace G1.
        let m = laplace(0.5);
        let v = fixed_lambda_fdp_variance(&m, 0.45, 0.5, LabelMode::Deterministic).unwrap();
        assert!((v - 0.830_070_742_704_904_1).abs() < 1e-9, "{v}");
    }

    #[test]
    fn tvr_deltas_match_finite_differences() {
        let m = laplace(0.5);
        let tab = CrossingTable::new(&m);
        assert_eq!(tab.predict_tvr_deltas(0.45, 0.0).unwrap(), (0.0, 0.0, 0.0));
        let bar = pi0_bar(&m);
        let t0 = tab.t_star(0.45, bar).unwrap();
        let mut errs = Vec::new();
        for d in [1e-2, 1e-3, 1e-4] {
            let (dt, dn, dr) = tab.predict_tvr_deltas(0.45, d).unwrap();
            assert!(dt < 0.0);
            assert!((dn - 0.5 * dt).abs() < 1e-15);
            assert!(dr < 0.0);
            let fd = tab.t_star(0.45, bar + d).unwrap() - t0;
            errs.push(((dt - fd) / fd).abs());
        }
        assert!(errs[0] < 0.05, "{errs:?}");
        assert!(errs[1] < errs[0] / 5.0 && errs[2] < errs[1] / 5.0, "{errs:?}");
    }

    #[test]
    fn bandwidth_check() {
        let c = BandwidthCheck::new(100_000, 0.5);
        assert!(c.warning);
        assert!(!BandwidthCheck::new(100_000, 0.0042).warning);
    }
}
