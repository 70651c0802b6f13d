//! P-value transforms and the induced p-value laws.
//!
//! One-sided primitives (`G1+`, `g1+`) are evaluated per family; the two-sided
//! law is always assembled from them through
//!
//! ```text
//! G1±(u) = G1+(u/2) + 1 - G1+(1 - u/2)
//! g1±(u) = (g1+(u/2) + g1+(1 - u/2)) / 2
//! ```
//!
//! The reflected term `1 - G1+(1 - v)` is evaluated as `F1(-F0⁻¹(1 - v))`,
//! which is the same quantity computed without forming `1 - v`.

use alloc::vec::Vec;
use libm::{exp, expm1, log, log1p};
use rand::Rng;

use crate::distributions::{AlternativeFamily, Extended, Family};
use crate::rng::substream;
use crate::special::{ln_1m_exp, ln_add_exp, LN_2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sidedness {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LabelMode {
    /// Exactly `round(π0·m)` nulls.
    #[default]
    Deterministic,
    /// Independent Bernoulli labels with `P(null) = π0`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Null,
    Alternative,
}

impl Label {
    pub fn is_null(self) -> bool {
        self == Label::Null
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPValues {
    pub pvalues: Vec<f64>,
    pub labels: Vec<Label>,
}

/// `π0` together with the alternative family and the sidedness of the test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureModel {
    pi0: f64,
    family: AlternativeFamily,
    sidedness: Sidedness,
}

impl MixtureModel {
    pub fn new(pi0: f64, family: AlternativeFamily, sidedness: Sidedness) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi0) {
            return Err(Error::InvalidParameter {
                name: "pi0",
                value: pi0,
                reason: "must lie in [0, 1]",
            });
        }
        if sidedness == Sidedness::TwoSided && !family.is_symmetric() {
            return Err(Error::InvalidParameter {
                name: "sidedness",
                value: f64::NAN,
                reason: "two-sided p-values need a symmetric null",
            });
        }
        Ok(MixtureModel {
            pi0,
            family,
            sidedness,
        })
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn family(&self) -> &AlternativeFamily {
        &self.family
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    /// Same family and sidedness with another `π0`.
    pub fn with_pi0(&self, pi0: f64) -> Result<Self> {
        MixtureModel::new(pi0, self.family, self.sidedness)
    }

    pub fn p_value(&self, x: f64) -> f64 {
        match self.sidedness {
            Sidedness::OneSided => self.family.f0_sf(x),
            Sidedness::TwoSided => (2.0 * self.family.f0_sf(x.abs())).min(1.0),
        }
    }

    fn laplace_theta(&self) -> Option<f64> {
        match self.family.family() {
            Family::Laplace => Some(self.family.theta()),
            _ => None,
        }
    }

    /// `ln G1+(u)` from `ln u`.
    fn plus_ln_cdf(&self, ln_u: f64) -> f64 {
        if let Some(th) = self.laplace_theta() {
            let u = exp(ln_u);
            return if ln_u <= -th - LN_2 {
                ln_u + th
            } else if u <= 0.5 {
                ln_1m_exp(-th - 2.0 * LN_2 - ln_u)
            } else {
                log1p(expm1(ln_u) * exp(-th))
            };
        }
        let f = &self.family;
        f.ln_f1_sf(f.f0_isf_ln(ln_u))
    }

    /// `ln(1 - G1+(1 - v))` from `ln v`.
    fn plus_ln_reflected(&self, ln_v: f64) -> f64 {
        if let Some(th) = self.laplace_theta() {
            if ln_v <= -LN_2 {
                return ln_v - th;
            }
            let w = -expm1(ln_v);
            return if w <= 0.5 * exp(-th) {
                log1p(-w * exp(th))
            } else {
                -th - 2.0 * LN_2 - log(w)
            };
        }
        let f = &self.family;
        f.ln_f1_cdf(-f.f0_isf_ln(ln_v))
    }

    /// `g1+(u)`.
    fn plus_pdf(&self, u: f64) -> f64 {
        if let Some(th) = self.laplace_theta() {
            return if u <= 0.5 * exp(-th) {
                exp(th)
            } else if u <= 0.5 {
                exp(-th) / (4.0 * u * u)
            } else {
                exp(-th)
            };
        }
        if u >= 1.0 {
            return self.family.lr_limit_neg();
        }
        self.family.likelihood_ratio(self.family.f0_isf(u))
    }

    /// `ln G1(u)` from `ln u`; usable for `u` far below the smallest double.
    pub fn ln_g1_cdf_ln(&self, ln_u: f64) -> f64 {
        if ln_u >= 0.0 {
            return 0.0;
        }
        match self.sidedness {
            Sidedness::OneSided => self.plus_ln_cdf(ln_u),
            Sidedness::TwoSided => {
                let ln_v = ln_u - LN_2;
                ln_add_exp(self.plus_ln_cdf(ln_v), self.plus_ln_reflected(ln_v)).min(0.0)
            }
        }
    }

    pub fn g1_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        exp(self.ln_g1_cdf_ln(log(u))).min(1.0)
    }

    /// Alternative p-value density; `u = 0` returns the limit (possibly `+∞`).
    pub fn g1_pdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.g1_at_zero().to_f64();
        }
        let u = u.min(1.0);
        match self.sidedness {
            Sidedness::OneSided => self.plus_pdf(u),
            Sidedness::TwoSided => 0.5 * (self.plus_pdf(0.5 * u) + self.reflected_pdf(0.5 * u)),
        }
    }

    /// `g1+(1 - v)` evaluated without forming `1 - v`.
    fn reflected_pdf(&self, v: f64) -> f64 {
        if self.laplace_theta().is_some() {
            return self.plus_pdf(1.0 - v);
        }
        self.family.likelihood_ratio(-self.family.f0_isf(v))
    }

    /// `lim_{u→0} g1(u)`.
    pub fn g1_at_zero(&self) -> Extended {
        let pos = self.family.lr_limit_pos();
        match (self.sidedness, pos) {
            (Sidedness::OneSided, p) => p,
            (Sidedness::TwoSided, Extended::Infinite) => Extended::Infinite,
            (Sidedness::TwoSided, Extended::Finite(p)) => {
                Extended::Finite(0.5 * (p + self.family.lr_limit_neg()))
            }
        }
    }

    /// `g1(1)`.
    pub fn g1_at_one(&self) -> f64 {
        self.g1_pdf(1.0)
    }

    pub fn mixture_cdf(&self, u: f64) -> f64 {
        self.pi0 * u + (1.0 - self.pi0) * self.g1_cdf(u)
    }

    pub fn mixture_pdf(&self, u: f64) -> f64 {
        let g1 = self.g1_pdf(u);
        if self.pi0 == 1.0 {
            return 1.0;
        }
        self.pi0 + (1.0 - self.pi0) * g1
    }

    /// `ln G(u)` from `ln u`.
    pub fn ln_mixture_cdf_ln(&self, ln_u: f64) -> f64 {
        let a = if self.pi0 > 0.0 { log(self.pi0) + ln_u } else { f64::NEG_INFINITY };
        let b = if self.pi0 < 1.0 {
            log1p(-self.pi0) + self.ln_g1_cdf_ln(ln_u)
        } else {
            f64::NEG_INFINITY
        };
        ln_add_exp(a, b)
    }

    /// Inverse of `G1+` for the one-sided Laplace closed form.
    fn laplace_plus_inverse(th: f64, v: f64) -> f64 {
        if v <= 0.5 {
            v * exp(-th)
        } else if v <= 1.0 - 0.5 * exp(-th) {
            exp(-th) / (4.0 * (1.0 - v))
        } else {
            1.0 - (1.0 - v) * exp(th)
        }
    }

    /// Draws one alternative p-value.
    pub fn sample_alt_pvalue<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let (Some(th), Sidedness::OneSided) = (self.laplace_theta(), self.sidedness) {
            return Self::laplace_plus_inverse(th, rng.random::<f64>());
        }
        self.p_value(self.family.sample_alt(rng))
    }

    pub fn sample_pvalues_with<R: Rng + ?Sized>(
        &self,
        m: usize,
        mode: LabelMode,
        rng: &mut R,
    ) -> LabeledPValues {
        let mut out = LabeledPValues {
            pvalues: Vec::with_capacity(m),
            labels: Vec::with_capacity(m),
        };
        let m0 = libm::round(self.pi0 * m as f64) as usize;
        for i in 0..m {
            let label = match mode {
                LabelMode::Deterministic if i < m0 => Label::Null,
                LabelMode::Deterministic => Label::Alternative,
                LabelMode::Bernoulli if rng.random::<f64>() < self.pi0 => Label::Null,
                LabelMode::Bernoulli => Label::Alternative,
            };
            let p = match label {
                Label::Null => rng.random::<f64>(),
                Label::Alternative => self.sample_alt_pvalue(rng),
            };
            out.pvalues.push(p);
            out.labels.push(label);
        }
        out
    }

    /// Samples `m` labeled p-values from stream 0 of `seed`.
    pub fn sample_pvalues(&self, m: usize, seed: u64, mode: LabelMode) -> Result<LabeledPValues> {
        if m == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(self.sample_pvalues_with(m, mode, &mut substream(seed, 0)))
    }
}
