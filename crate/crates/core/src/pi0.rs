//! Estimators of the proportion of true nulls from p-values near 1.
//!
//! All of them estimate the mixture density at 1, whose value is
//! `π0 + (1 - π0)·g1(1)`; this equals `π0` only for pure models.

use alloc::vec::Vec;
use libm::{fabs, log, pow, sqrt};

use crate::distributions::Family;
use crate::procedures::check_pvalues;
use crate::pvalues::{MixtureModel, Sidedness};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    /// `η_m = (ln m)^{-c}`.
    PowerLog { exponent: f64 },
    Explicit(f64),
}

impl Default for EtaRule {
    fn default() -> Self {
        EtaRule::PowerLog {
            exponent: 1.0 / 3.0,
        }
    }
}

impl EtaRule {
    pub fn eta(&self, m: usize) -> f64 {
        match *self {
            EtaRule::PowerLog { exponent } => pow(log(m as f64), -exponent),
            EtaRule::Explicit(eta) => eta,
        }
    }
}

/// `h_m(k) = m^{-1/(2k+1)}·η_m²`.
pub fn bandwidth(m: usize, k: u32, eta: EtaRule) -> f64 {
    let e = eta.eta(m);
    pow(m as f64, -1.0 / (2.0 * k as f64 + 1.0)) * e * e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pi0Estimator {
    StoreyFixed { lambda: f64 },
    StoreyBandwidth { k: u32, eta: EtaRule },
    KernelOrderK { k: u32, eta: EtaRule },
}

impl Pi0Estimator {
    pub fn kind(&self) -> &'static str {
        match self {
            Pi0Estimator::StoreyFixed { .. } => "storey_fixed",
            Pi0Estimator::StoreyBandwidth { .. } => "storey_bandwidth",
            Pi0Estimator::KernelOrderK { .. } => "kernel",
        }
    }

    /// Window width at 1 used for `m` p-values (`1 - λ` for fixed `λ`).
    pub fn bandwidth(&self, m: usize) -> f64 {
        match *self {
            Pi0Estimator::StoreyFixed { lambda } => 1.0 - lambda,
            Pi0Estimator::StoreyBandwidth { k, eta } | Pi0Estimator::KernelOrderK { k, eta } => {
                bandwidth(m, k, eta)
            }
        }
    }

    pub fn estimate(&self, p: &[f64]) -> Result<Pi0Estimate> {
        match *self {
            Pi0Estimator::StoreyFixed { lambda } => storey_fixed(p, lambda),
            Pi0Estimator::StoreyBandwidth { k, eta } => storey_bandwidth(p, k, eta),
            Pi0Estimator::KernelOrderK { k, eta } => kernel_pi0(p, k, eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi0Estimate {
    pub estimator: Pi0Estimator,
    pub value_raw: f64,
    /// `value_raw` clamped to `[1/m, 1]`, the value plug-in procedures use.
    pub value: f64,
    pub bandwidth: f64,
    pub asymptotic_se: f64,
}

fn clamp(raw: f64, m: usize) -> f64 {
    raw.clamp(1.0 / m as f64, 1.0)
}

/// Storey's `(1 - F̂(λ))/(1 - λ)`.
pub fn storey_fixed(p: &[f64], lambda: f64) -> Result<Pi0Estimate> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must lie in (0, 1)",
        });
    }
    check_pvalues(p)?;
    let m = p.len();
    let above = p.iter().filter(|&&x| x > lambda).count();
    let h = 1.0 - lambda;
    let raw = above as f64 / m as f64 / h;
    let g = 1.0 - above as f64 / m as f64;
    Ok(Pi0Estimate {
        estimator: Pi0Estimator::StoreyFixed { lambda },
        value_raw: raw,
        value: clamp(raw, m),
        bandwidth: h,
        asymptotic_se: sqrt(g * (1.0 - g) / (h * h * m as f64)),
    })
}

fn rule_bandwidth(m: usize, k: u32, eta: EtaRule) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            reason: "bandwidth rules need at least 2 p-values",
        });
    }
    let h = bandwidth(m, k, eta);
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::BandwidthTooLarge { bandwidth: h, m });
    }
    Ok(h)
}

/// Storey's estimator at `λ = 1 - h_m(k)`.
pub fn storey_bandwidth(p: &[f64], k: u32, eta: EtaRule) -> Result<Pi0Estimate> {
    check_pvalues(p)?;
    let m = p.len();
    let h = rule_bandwidth(m, k, eta)?;
    let mut est = storey_fixed(p, 1.0 - h)?;
    est.estimator = Pi0Estimator::StoreyBandwidth { k, eta };
    est.bandwidth = h;
    est.asymptotic_se = sqrt(est.value_raw.max(0.0) / (m as f64 * h));
    Ok(est)
}

/// Polynomial kernel on `[-1, 0]` with `∫K = 1` and `∫u^j K = 0` for `j = 1..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryKernel {
    coeffs: Vec<f64>,
}

impl BoundaryKernel {
    pub fn new(order: u32) -> Result<Self> {
        if order > 12 {
            return Err(Error::InvalidParameter {
                name: "k",
                value: order as f64,
                reason: "kernel order above 12 is numerically unreliable",
            });
        }
        let n = order as usize + 1;
        // Moment matrix M_ij = ∫_{-1}^0 u^{i+j} du = (-1)^{i+j}/(i+j+1).
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n)
                    .map(|j| {
                        let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        s / (i + j + 1) as f64
                    })
                    .collect();
                row.push(if i == 0 { 1.0 } else { 0.0 });
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| fabs(a[x][col]).total_cmp(&fabs(a[y][col])))
                .unwrap_or(col);
            a.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    let pivot = a[col].clone();
                    for (x, p) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
        let coeffs = (0..n).map(|i| a[i][n] / a[i][i]).collect();
        Ok(BoundaryKernel { coeffs })
    }

    /// Order-0 kernel: the indicator of `[-1, 0]`.
    pub fn rectangular() -> Self {
        BoundaryKernel {
            coeffs: alloc::vec![1.0],
        }
    }

    pub fn order(&self) -> u32 {
        self.coeffs.len() as u32 - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, u: f64) -> f64 {
        if !(-1.0..=0.0).contains(&u) {
            return 0.0;
        }
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// `∫ K²`.
    pub fn roughness(&self) -> f64 {
        let n = self.coeffs.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                s += self.coeffs[i] * self.coeffs[j] * sign / (i + j + 1) as f64;
            }
        }
        s
    }
}

/// Boundary-kernel estimate of the p-value density at 1 with bandwidth `h`.
pub fn kernel_pi0_with(p: &[f64], kernel: &BoundaryKernel, h: f64) -> Result<Pi0Estimate> {
    check_pvalues(p)?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "bandwidth must lie in (0, 1)",
        });
    }
    let m = p.len();
    let lambda = 1.0 - h;
    let s: f64 = p
        .iter()
        .filter(|&&x| x > lambda)
        .map(|&x| kernel.eval((x - 1.0) / h))
        .sum();
    let raw = s / (m as f64 * (1.0 - lambda));
    Ok(Pi0Estimate {
        estimator: Pi0Estimator::KernelOrderK {
            k: kernel.order(),
            eta: EtaRule::Explicit(f64::NAN),
        },
        value_raw: raw,
        value: clamp(raw, m),
        bandwidth: h,
        asymptotic_se: sqrt(raw.max(0.0) * kernel.roughness() / (m as f64 * h)),
    })
}

/// Order-`k` boundary kernel estimate at the rule bandwidth `h_m(k)`.
pub fn kernel_pi0(p: &[f64], k: u32, eta: EtaRule) -> Result<Pi0Estimate> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: 0.0,
            reason: "kernel order must be >= 1",
        });
    }
    check_pvalues(p)?;
    let h = rule_bandwidth(p.len(), k, eta)?;
    let mut est = kernel_pi0_with(p, &BoundaryKernel::new(k)?, h)?;
    est.estimator = Pi0Estimator::KernelOrderK { k, eta };
    Ok(est)
}

/// Leading bias `(1 - π0)·(-1)^k·g1^{(k)}(1)/(k+1)!·h^k` of Storey's estimator
/// at `λ = 1 - h`.
pub fn predicted_bias(model: &MixtureModel, k: u32, h: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: 0.0,
            reason: "bias order must be >= 1",
        });
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "bandwidth must lie in (0, 1)",
        });
    }
    let pi0 = model.pi0();
    if pi0 == 1.0 {
        return Ok(0.0);
    }
    let d = g1_derivative_at_one(model, k)?;
    let fact: f64 = (1..=k + 1).map(|i| i as f64).product();
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok((1.0 - pi0) * sign * d / fact * pow(h, k as f64))
}

enum Stencil {
    /// `g1` extends evenly across 1; central differences.
    Reflected,
    /// Differences from the left of 1 only.
    Backward,
}

/// `g1^{(k)}(1)` by Richardson-extrapolated finite differences (base step 1e-3).
///
/// One-sided tests are smooth at 1 only when `G1+` is linear near 1 (Laplace);
/// otherwise the density approaches `g1(1)` with an infinite derivative. For
/// two-sided tests `g1±(1 - s)` is an even function of the statistic, so odd
/// derivatives vanish whenever the likelihood ratio is smooth at 0.
pub fn g1_derivative_at_one(model: &MixtureModel, k: u32) -> Result<f64> {
    let fam = model.family().family();
    let laplace_like = matches!(fam, Family::Laplace)
        || matches!(fam, Family::Subbotin { gamma } if gamma == 1.0);
    let stencil = match (model.sidedness(), fam) {
        (Sidedness::OneSided, _) if laplace_like => return Ok(0.0),
        (Sidedness::OneSided, _) => return Err(Error::NonDifferentiable { order: k }),
        (Sidedness::TwoSided, _) if laplace_like => Stencil::Backward,
        (Sidedness::TwoSided, Family::Subbotin { gamma }) => {
            let even = gamma == libm::round(gamma) && (gamma as u64).is_multiple_of(2);
            if !even && k as f64 >= gamma {
                return Err(Error::NonDifferentiable { order: k });
            }
            Stencil::Reflected
        }
        (Sidedness::TwoSided, _) => Stencil::Reflected,
    };
    let f = |s: f64| model.g1_pdf(1.0 - fabs(s));
    let binom = |j: u32| -> f64 { (1..=j).map(|i| (k - i + 1) as f64 / i as f64).product() };
    let diff = |h: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let x = match stencil {
                Stencil::Reflected => (0.5 * k as f64 - j as f64) * h,
                Stencil::Backward => -(j as f64) * h,
            };
            acc += sign * binom(j) * f(x);
        }
        acc / pow(h, k as f64)
    };
    let h = 1e-3;
    let (d1, d2, d3) = (diff(h), diff(h / 2.0), diff(h / 4.0));
    Ok(match stencil {
        Stencil::Reflected => {
            let r1 = d2 + (d2 - d1) / 3.0;
            let r2 = d3 + (d3 - d2) / 3.0;
            r2 + (r2 - r1) / 15.0
        }
        Stencil::Backward => {
            let r1 = 2.0 * d2 - d1;
            let r2 = 2.0 * d3 - d2;
            r2 + (r2 - r1) / 3.0
        }
    })
}

/// Highest derivative order checked by [`leading_bias_order`]; finite
/// differences beyond it are dominated by rounding.
pub const MAX_DETECTED_ORDER: u32 = 4;

/// Smallest `l` in `1..=min(max_k, 4)` with `|g1^{(l)}(1)| > 1e-3`.
///
/// The bias of a boundary estimator is of order `h^l` for this `l`, whatever
/// order the estimator was tuned for. `None` means no such derivative was
/// found within the checked range.
pub fn leading_bias_order(model: &MixtureModel, max_k: u32) -> Result<Option<u32>> {
    if model.pi0() == 1.0 {
        return Ok(None);
    }
    for l in 1..=max_k.min(MAX_DETECTED_ORDER) {
        if fabs(g1_derivative_at_one(model, l)?) > 1e-3 {
            return Ok(Some(l));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::AlternativeFamily;
    use crate::quad::{integrate, Tolerance};

    #[test]
    fn storey_examples() {
        let e = storey_fixed(&[0.1, 0.2, 0.3, 0.9], 0.5).unwrap();
        assert_eq!(e.value_raw, 0.5);
        let e = storey_fixed(&[0.6, 0.7, 0.9], 0.5).unwrap();
        assert_eq!(e.value_raw, 2.0);
        assert_eq!(e.value, 1.0);
        assert!(storey_fixed(&[0.5], 1.0).is_err());
        assert!(storey_fixed(&[0.5], 0.0).is_err());
    }

    #[test]
    fn bandwidth_rule_arithmetic() {
        let m = 100_000usize;
        let lnm = (m as f64).ln();
        let h1 = bandwidth(m, 1, EtaRule::default());
        assert!((h1 - (m as f64).powf(-1.0 / 3.0) * lnm.powf(-2.0 / 3.0)).abs() < 1e-16);
        assert!((h1 - 0.004_225_481_500_244_959).abs() < 1e-15);
        let h2 = bandwidth(m, 2, EtaRule::default());
        assert!((h2 - 0.019_612_947_748_174_37).abs() < 1e-15);
        assert_eq!(bandwidth(m, 1, EtaRule::Explicit(1.0)), (m as f64).powf(-1.0 / 3.0));
        // Too few p-values for the rule.
        assert!(matches!(
            storey_bandwidth(&[0.2, 0.9], 1, EtaRule::Explicit(3.0)),
            Err(Error::BandwidthTooLarge { .. })
        ));
    }

    #[test]
    fn kernel_moments() {
        for k in 0..=6 {
            let ker = BoundaryKernel::new(k).unwrap();
            for j in 0..=k {
                let q = integrate(|u| u.powi(j as i32) * ker.eval(u), -1.0, 0.0, Tolerance::default());
                let want = if j == 0 { 1.0 } else { 0.0 };
                assert!((q.value - want).abs() < 1e-10, "k={k} j={j}: {}", q.value);
            }
            let r = integrate(|u| ker.eval(u).powi(2), -1.0, 0.0, Tolerance::default());
            assert!((r.value - ker.roughness()).abs() < 1e-9 * ker.roughness(), "k={k}: {} vs {}", r.value, ker.roughness());
        }
        assert_eq!(BoundaryKernel::new(0).unwrap(), BoundaryKernel::rectangular());
    }

    #[test]
    fn rectangular_kernel_is_storey() {
        let p: Vec<f64> = (0..997).map(|i| ((i * 7919) % 997) as f64 / 997.0).collect();
        let h = bandwidth(p.len(), 1, EtaRule::default());
        let a = kernel_pi0_with(&p, &BoundaryKernel::rectangular(), h).unwrap();
        let b = storey_bandwidth(&p, 1, EtaRule::default()).unwrap();
        assert!((a.value_raw - b.value_raw).abs() < 1e-12);
    }

    fn gauss2(pi0: f64) -> MixtureModel {
        MixtureModel::new(pi0, AlternativeFamily::gaussian(2.0).unwrap(), Sidedness::TwoSided).unwrap()
    }

    #[test]
    fn bias_examples() {
        assert!(predicted_bias(&gauss2(0.5), 1, 0.05).unwrap().abs() < 1e-9);
        assert_eq!(predicted_bias(&gauss2(1.0), 2, 0.05).unwrap(), 0.0);
        let b = predicted_bias(&gauss2(0.5), 2, 0.05).unwrap();
        let want = 0.5 * (core::f64::consts::PI / 2.0) * 4.0 * (-2f64).exp() / 6.0 * 0.0025;
        assert!((b - want).abs() < 1e-9 * want, "{b} vs {want}");
        assert!((b - 1.771_534_714_948_485e-4).abs() < 1e-12);
        let one = MixtureModel::new(0.5, AlternativeFamily::gaussian(2.0).unwrap(), Sidedness::OneSided)
            .unwrap();
        assert_eq!(predicted_bias(&one, 1, 0.1), Err(Error::NonDifferentiable { order: 1 }));
    }

    #[test]
    fn laplace_derivatives() {
        let th = 2.0f64;
        let f = AlternativeFamily::laplace(th).unwrap();
        let one = MixtureModel::new(0.5, f, Sidedness::OneSided).unwrap();
        assert_eq!(g1_derivative_at_one(&one, 1).unwrap(), 0.0);
        // g1±(u) = (e^{-θ}/2)(1 + 1/u²) near 1.
        let two = MixtureModel::new(0.5, f, Sidedness::TwoSided).unwrap();
        let d1 = g1_derivative_at_one(&two, 1).unwrap();
        assert!((d1 + (-th).exp()).abs() < 1e-9, "{d1}");
        let d2 = g1_derivative_at_one(&two, 2).unwrap();
        assert!((d2 - 3.0 * (-th).exp()).abs() < 1e-6, "{d2}");
    }

    #[test]
    fn detected_orders() {
        assert_eq!(leading_bias_order(&gauss2(0.5), 4).unwrap(), Some(2));
        assert_eq!(leading_bias_order(&gauss2(0.5), 1).unwrap(), None);
        assert_eq!(leading_bias_order(&gauss2(1.0), 4).unwrap(), None);
        let l = AlternativeFamily::laplace(2.0).unwrap();
        let two = MixtureModel::new(0.5, l, Sidedness::TwoSided).unwrap();
        assert_eq!(leading_bias_order(&two, 4).unwrap(), Some(1));
        let one = MixtureModel::new(0.5, l, Sidedness::OneSided).unwrap();
        assert_eq!(leading_bias_order(&one, 4).unwrap(), None);
        let s4 = AlternativeFamily::subbotin(2.0, 4.0).unwrap();
        let m = MixtureModel::new(0.5, s4, Sidedness::TwoSided).unwrap();
        assert_eq!(leading_bias_order(&m, 4).unwrap(), Some(2));
    }
}
