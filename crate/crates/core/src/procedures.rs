//! BH95 step-up and plug-in procedures with ground-truth accounting.

use alloc::vec::Vec;

use crate::pvalues::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BhOutcome {
    pub alpha: f64,
    /// Level the step-up actually ran at (`α/π̂0` for plug-in, at most 1).
    pub effective_level: f64,
    pub m: usize,
    pub i_hat: usize,
    pub tau_hat: f64,
    /// Rejected indices, ascending.
    pub rejected: Vec<usize>,
    pub r: usize,
    pub v: Option<usize>,
    pub fdp: Option<f64>,
    pub power: Option<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlugInMode {
    /// Run at `min(α/π̂0, 1)`.
    #[default]
    Clamp,
    /// Fail when `α/π̂0 > 1`.
    Strict,
}

pub(crate) fn check_pvalues(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::PValueOutOfRange { index, value });
    }
    Ok(())
}

fn check_level(name: &'static str, a: f64) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter {
            name,
            value: a,
            reason: "must lie in (0, 1]",
        });
    }
    Ok(())
}

/// P-values sorted once (stable, ties by index) for repeated step-up scans.
#[derive(Debug, Clone)]
pub struct SortedPValues {
    order: Vec<usize>,
    sorted: Vec<f64>,
}

impl SortedPValues {
    pub fn new(p: &[f64]) -> Result<Self> {
        check_pvalues(p)?;
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
        let sorted = order.iter().map(|&i| p[i]).collect();
        Ok(SortedPValues { order, sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Original indices in ascending p-value order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Largest `k` with `P_(k) <= level·k/m`, or 0.
    pub fn i_hat(&self, level: f64) -> usize {
        let m = self.sorted.len() as f64;
        (1..=self.sorted.len())
            .rev()
            .find(|&k| self.sorted[k - 1] <= level * k as f64 / m)
            .unwrap_or(0)
    }

    fn outcome(&self, alpha: f64, level: f64) -> BhOutcome {
        let m = self.sorted.len();
        let i_hat = self.i_hat(level);
        let tau_hat = level * i_hat as f64 / m as f64;
        let mut rejected: Vec<usize> = self.order[..i_hat].to_vec();
        rejected.sort_unstable();
        BhOutcome {
            alpha,
            effective_level: level,
            m,
            i_hat,
            tau_hat,
            r: i_hat,
            rejected,
            v: None,
            fdp: None,
            power: None,
            rho: i_hat as f64 / m as f64,
        }
    }

    pub fn bh95(&self, alpha: f64) -> Result<BhOutcome> {
        check_level("alpha", alpha)?;
        Ok(self.outcome(alpha, alpha))
    }

    pub fn plug_in(&self, alpha: f64, pi0_hat: f64, mode: PlugInMode) -> Result<BhOutcome> {
        Ok(self.outcome(alpha, plug_in_level(alpha, pi0_hat, mode)?))
    }
}

/// `min(α/π̂0, 1)` (or an error in strict mode).
pub fn plug_in_level(alpha: f64, pi0_hat: f64, mode: PlugInMode) -> Result<f64> {
    check_level("alpha", alpha)?;
    check_level("pi0_hat", pi0_hat)?;
    let level = alpha / pi0_hat;
    match mode {
        PlugInMode::Clamp => Ok(level.min(1.0)),
        PlugInMode::Strict if level > 1.0 => Err(Error::InvalidParameter {
            name: "pi0_hat",
            value: pi0_hat,
            reason: "alpha / pi0_hat exceeds 1 in strict mode",
        }),
        PlugInMode::Strict => Ok(level),
    }
}

pub fn bh95(p: &[f64], alpha: f64) -> Result<BhOutcome> {
    SortedPValues::new(p)?.bh95(alpha)
}

pub fn plug_in_bh(p: &[f64], alpha: f64, pi0_hat: f64) -> Result<BhOutcome> {
    plug_in_bh_with(p, alpha, pi0_hat, PlugInMode::Clamp)
}

pub fn plug_in_bh_with(p: &[f64], alpha: f64, pi0_hat: f64, mode: PlugInMode) -> Result<BhOutcome> {
    SortedPValues::new(p)?.plug_in(alpha, pi0_hat, mode)
}

/// Fills `V`, FDP and power from the true labels.
pub fn account(outcome: &BhOutcome, labels: &[Label]) -> Result<BhOutcome> {
    if labels.len() != outcome.m {
        return Err(Error::LengthMismatch {
            expected: outcome.m,
            found: labels.len(),
        });
    }
    let m0 = labels.iter().filter(|l| l.is_null()).count();
    let v = outcome.rejected.iter().filter(|&&i| labels[i].is_null()).count();
    let mut out = outcome.clone();
    out.v = Some(v);
    out.fdp = Some(v as f64 / outcome.r.max(1) as f64);
    out.power = if m0 < outcome.m {
        Some((outcome.r - v) as f64 / (outcome.m - m0) as f64)
    } else {
        None
    };
    Ok(out)
}
