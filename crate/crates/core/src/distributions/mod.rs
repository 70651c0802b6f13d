//! Test-statistic families under the null and the alternative.
//!
//! Null densities are symmetric. Location families shift the null by `θ`;
//! the Student alternative is the noncentral t with noncentrality `θ`.
//!
//! Scale convention: the Subbotin density is `exp(-|t|^γ/γ)/C_γ` with
//! `C_γ = 2·γ^{1/γ-1}·Γ(1/γ)`, so `γ = 2` is the standard normal and `γ = 1`
//! is the Laplace density `exp(-|t|)/2`.

pub mod hh;
mod student;

pub use hh::{hh, ln_hh};

use libm::{exp, fabs, lgamma, log, log1p, pow, sqrt};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};

use crate::roots::newton_decreasing;
use crate::special::{
    ln_1m_exp, ln_beta_inc, ln_gamma_pq, ln_norm_sf, norm_isf_ln, LN_2, LN_SQRT_2PI,
};
use crate::{Error, Result};

/// The largest statistic magnitude the quantile search explores.
const T_CAP: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian,
    Laplace,
    Subbotin { gamma: f64 },
    Student { df: u32 },
}

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::Infinite => f64::INFINITY,
        }
    }
}

/// Null and alternative test-statistic laws for one family and effect `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternativeFamily {
    family: Family,
    theta: f64,
    // ln of the null normalizing constant: C_γ for Subbotin, the Student
    // density constant otherwise.
    ln_norm: f64,
    ln_hh0: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must be finite and non-negative",
        });
    }
    Ok(())
}

impl AlternativeFamily {
    pub fn gaussian(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(AlternativeFamily {
            family: Family::Gaussian,
            theta,
            ln_norm: LN_SQRT_2PI,
            ln_hh0: 0.0,
        })
    }

    pub fn laplace(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(AlternativeFamily {
            family: Family::Laplace,
            theta,
            ln_norm: LN_2,
            ln_hh0: 0.0,
        })
    }

    pub fn subbotin(theta: f64, gamma: f64) -> Result<Self> {
        check_theta(theta)?;
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                reason: "Subbotin exponent must be finite and >= 1",
            });
        }
        Ok(AlternativeFamily {
            family: Family::Subbotin { gamma },
            theta,
            ln_norm: subbotin_ln_c(gamma),
            ln_hh0: 0.0,
        })
    }

    /// Noncentral Student alternative against the central Student null.
    pub fn student(df: u32, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if df == 0 {
            return Err(Error::InvalidParameter {
                name: "df",
                value: 0.0,
                reason: "Student family requires k >= 1",
            });
        }
        if theta > 40.0 {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "Student noncentrality is limited to 40",
            });
        }
        let k = df as f64;
        let ln_norm = lgamma(0.5 * (k + 1.0)) - lgamma(0.5 * k) - 0.5 * log(k * core::f64::consts::PI);
        Ok(AlternativeFamily {
            family: Family::Student { df },
            theta,
            ln_norm,
            ln_hh0: ln_hh(df as i32, 0.0)?,
        })
    }

    pub fn new(family: Family, theta: f64) -> Result<Self> {
        match family {
            Family::Gaussian => Self::gaussian(theta),
            Family::Laplace => Self::laplace(theta),
            Family::Subbotin { gamma } => Self::subbotin(theta, gamma),
            Family::Student { df } => Self::student(df, theta),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Whether `f1(t) = f0(t - θ)`.
    pub fn is_location(&self) -> bool {
        !matches!(self.family, Family::Student { .. })
    }

    /// Every family in scope has a symmetric null density.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn ln_f0_pdf(&self, t: f64) -> f64 {
        match self.family {
            Family::Gaussian => -0.5 * t * t - self.ln_norm,
            Family::Laplace => -fabs(t) - self.ln_norm,
            Family::Subbotin { gamma } => -pow(fabs(t), gamma) / gamma - self.ln_norm,
            Family::Student { df } => {
                let k = df as f64;
                self.ln_norm - 0.5 * (k + 1.0) * log1p(t * t / k)
            }
        }
    }

    pub fn f0_pdf(&self, t: f64) -> f64 {
        exp(self.ln_f0_pdf(t))
    }

    /// `ln(1 - F0(t))` for `t >= 0`.
    fn ln_upper(&self, t: f64) -> f64 {
        match self.family {
            Family::Gaussian => ln_norm_sf(t),
            Family::Laplace => -t - LN_2,
            Family::Subbotin { gamma } => {
                -LN_2 + ln_gamma_pq(1.0 / gamma, pow(t, gamma) / gamma).1
            }
            Family::Student { df } => {
                let k = df as f64;
                let r = t * t / k;
                -LN_2 + ln_beta_inc(0.5 * k, 0.5, 1.0 / (1.0 + r), r / (1.0 + r)).0
            }
        }
    }

    /// `ln(1 - F0(t))`, accurate in both tails.
    pub fn ln_f0_sf(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.ln_upper(t)
        } else {
            ln_1m_exp(self.ln_upper(-t))
        }
    }

    pub fn f0_sf(&self, t: f64) -> f64 {
        exp(self.ln_f0_sf(t))
    }

    pub fn f0_cdf(&self, t: f64) -> f64 {
        exp(self.ln_f0_sf(-t))
    }

    /// The `t` with `1 - F0(t) = e^{ln_u}`.
    pub fn f0_isf_ln(&self, ln_u: f64) -> f64 {
        if ln_u >= 0.0 {
            return f64::NEG_INFINITY;
        }
        if ln_u == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        if ln_u > -LN_2 {
            return -self.f0_isf_ln(ln_1m_exp(ln_u));
        }
        match self.family {
            Family::Gaussian => norm_isf_ln(ln_u),
            Family::Laplace => -LN_2 - ln_u,
            _ => self.solve_upper(ln_u),
        }
    }

    pub fn f0_isf(&self, u: f64) -> f64 {
        self.f0_isf_ln(log(u))
    }

    /// Inverse of the null cdf on `(0, 1)`.
    pub fn f0_quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain {
                what: "f0_quantile requires u in (0, 1)",
                value: u,
            });
        }
        Ok(-self.f0_isf(u))
    }

    // Newton in s = ln t on the upper tail; ln_u <= -ln 2.
    fn solve_upper(&self, ln_u: f64) -> f64 {
        if ln_u == -LN_2 {
            return 0.0;
        }
        let g = |s: f64| self.ln_upper(exp(s)) - ln_u;
        let dg = |s: f64| {
            let t = exp(s);
            -t * exp(self.ln_f0_pdf(t) - self.ln_upper(t))
        };
        let guess = match self.family {
            Family::Subbotin { gamma } => pow(gamma * (-ln_u - self.ln_norm).max(1e-3), 1.0 / gamma),
            Family::Student { df } => {
                let k = df as f64;
                let tail = exp((self.ln_norm + 0.5 * (k - 1.0) * log(k) - ln_u) / k);
                tail.max(norm_isf_ln(ln_u))
            }
            _ => norm_isf_ln(ln_u),
        };
        let mut hi = log(guess.max(1e-3)) + 1.0;
        while g(hi) > 0.0 && exp(hi) < T_CAP {
            hi += 2.0;
        }
        let lo = -700.0;
        exp(newton_decreasing(g, dg, lo, hi, log(guess.max(1e-300))))
    }

    /// `ln f1(t)`.
    pub fn ln_f1_pdf(&self, t: f64) -> f64 {
        if self.is_location() {
            self.ln_f0_pdf(t - self.theta)
        } else {
            self.ln_f0_pdf(t) + self.ln_likelihood_ratio(t)
        }
    }

    pub fn f1_pdf(&self, t: f64) -> f64 {
        exp(self.ln_f1_pdf(t))
    }

    /// `ln(1 - F1(t))`.
    pub fn ln_f1_sf(&self, t: f64) -> f64 {
        match self.family {
            Family::Student { df } => student::ln_sf(df as f64, self.theta, t),
            _ => self.ln_f0_sf(t - self.theta),
        }
    }

    /// `ln F1(t)`.
    pub fn ln_f1_cdf(&self, t: f64) -> f64 {
        match self.family {
            Family::Student { df } => student::ln_cdf(df as f64, self.theta, t),
            _ => self.ln_f0_sf(self.theta - t),
        }
    }

    pub fn f1_sf(&self, t: f64) -> f64 {
        exp(self.ln_f1_sf(t))
    }

    pub fn f1_cdf(&self, t: f64) -> f64 {
        exp(self.ln_f1_cdf(t))
    }

    /// `ln(f1(t)/f0(t))`.
    pub fn ln_likelihood_ratio(&self, t: f64) -> f64 {
        let th = self.theta;
        match self.family {
            Family::Gaussian => th * t - 0.5 * th * th,
            Family::Laplace => fabs(t) - fabs(t - th),
            Family::Subbotin { gamma } => (pow(fabs(t), gamma) - pow(fabs(t - th), gamma)) / gamma,
            Family::Student { df } => {
                if th == 0.0 {
                    return 0.0;
                }
                let k = df as f64;
                let z = -th * t / sqrt(k + t * t);
                let z = if t.is_infinite() { -th * t.signum() } else { z };
                let ln_h = ln_hh(df as i32, z).expect("|z| <= theta <= 40");
                -0.5 * th * th / (1.0 + t * t / k) + ln_h - self.ln_hh0
            }
        }
    }

    pub fn likelihood_ratio(&self, t: f64) -> f64 {
        exp(self.ln_likelihood_ratio(t))
    }

    /// Limit of the likelihood ratio as `t → +∞`.
    pub fn lr_limit_pos(&self) -> Extended {
        match self.family {
            Family::Laplace => Extended::Finite(exp(self.theta)),
            Family::Subbotin { gamma: 1.0 } => Extended::Finite(exp(self.theta)),
            Family::Student { .. } => Extended::Finite(self.likelihood_ratio(f64::INFINITY)),
            _ if self.theta == 0.0 => Extended::Finite(1.0),
            _ => Extended::Infinite,
        }
    }

    /// Limit of the likelihood ratio as `t → -∞`.
    pub fn lr_limit_neg(&self) -> f64 {
        match self.family {
            Family::Gaussian => {
                if self.theta == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Laplace => exp(-self.theta),
            Family::Subbotin { gamma: 1.0 } => exp(-self.theta),
            Family::Subbotin { .. } => {
                if self.theta == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Student { .. } => self.likelihood_ratio(f64::NEG_INFINITY),
        }
    }

    pub fn sample_null<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Laplace => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
            Family::Subbotin { gamma } => {
                let g = Gamma::new(1.0 / gamma, 1.0).expect("valid shape").sample(rng);
                let r = pow(gamma * g, 1.0 / gamma);
                if rng.random::<bool>() {
                    r
                } else {
                    -r
                }
            }
            Family::Student { df } => {
                let z: f64 = rng.sample(StandardNormal);
                let u = ChiSquared::new(df as f64).expect("df >= 1").sample(rng);
                z / sqrt(u / df as f64)
            }
        }
    }

    pub fn sample_alt<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Student { df } => {
                let z: f64 = rng.sample(StandardNormal);
                let u = ChiSquared::new(df as f64).expect("df >= 1").sample(rng);
                (z + self.theta) / sqrt(u / df as f64)
            }
            _ => self.sample_null(rng) + self.theta,
        }
    }
}

/// `ln C_γ` with `C_γ = 2·γ^{1/γ-1}·Γ(1/γ)`.
pub fn subbotin_ln_c(gamma: f64) -> f64 {
    LN_2 + (1.0 / gamma - 1.0) * log(gamma) + lgamma(1.0 / gamma)
}

/// Two-group effect: standardized mean difference and group sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectSpec {
    delta: f64,
    n_x: usize,
    n_y: usize,
}

impl EffectSpec {
    pub fn new(delta: f64, n_x: usize, n_y: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "effect size must be positive",
            });
        }
        if n_x < 2 || n_y < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n_x.min(n_y) as f64,
                reason: "each group needs at least 2 samples",
            });
        }
        Ok(EffectSpec { delta, n_x, n_y })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    /// `θ = δ / √(1/n_X + 1/n_Y)`.
    pub fn theta(&self) -> f64 {
        self.delta / sqrt(1.0 / self.n_x as f64 + 1.0 / self.n_y as f64)
    }

    /// `n_X + n_Y - 2`.
    pub fn df(&self) -> u32 {
        (self.n_x + self.n_y - 2) as u32
    }

    pub fn family(&self) -> Result<AlternativeFamily> {
        AlternativeFamily::student(self.df(), self.theta())
    }
}
