//! Two-sample pooled-variance t tests on feature-by-sample matrices, with
//! stratified column resampling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use libm::{floor, sqrt};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::asymptotics::CrossingTable;
use crate::distributions::{AlternativeFamily, EffectSpec};
use crate::procedures::SortedPValues;
use crate::pvalues::{MixtureModel, Sidedness};
use crate::rng::{stream_key, substream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    X,
    Y,
}

/// `m` features by `n` samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleDataset {
    values: Vec<f64>,
    m: usize,
    groups: Vec<Group>,
    feature_ids: Vec<String>,
}

impl TwoSampleDataset {
    pub fn new(values: Vec<f64>, groups: Vec<Group>, feature_ids: Vec<String>) -> Result<Self> {
        let n = groups.len();
        let m = feature_ids.len();
        if m == 0 || n == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != m * n {
            return Err(Error::LengthMismatch {
                expected: m * n,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData {
                reason: format!(
                    "missing or non-finite value for feature '{}' in sample column {}",
                    feature_ids[i / n],
                    i % n
                ),
            });
        }
        let d = TwoSampleDataset {
            values,
            m,
            groups,
            feature_ids,
        };
        if d.n_x() < 2 || d.n_y() < 2 {
            return Err(Error::InvalidData {
                reason: format!("need at least 2 samples per group, got X={} Y={}", d.n_x(), d.n_y()),
            });
        }
        Ok(d)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.groups.len()
    }

    pub fn n_x(&self) -> usize {
        self.groups.iter().filter(|&&g| g == Group::X).count()
    }

    pub fn n_y(&self) -> usize {
        self.n() - self.n_x()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    /// Column indices of each group, ascending.
    pub fn columns(&self, g: Group) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.groups[j] == g).collect()
    }

    pub fn t_statistics(&self) -> Result<Vec<f64>> {
        self.t_statistics_subset(&self.columns(Group::X), &self.columns(Group::Y))
    }

    /// Pooled t statistics `(Ȳ - X̄)/(S·√(1/n_X + 1/n_Y))` using only the given columns.
    pub fn t_statistics_subset(&self, xs: &[usize], ys: &[usize]) -> Result<Vec<f64>> {
        let (nx, ny) = (xs.len(), ys.len());
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidData {
                reason: format!("need at least 2 samples per group, got X={nx} Y={ny}"),
            });
        }
        let scale = sqrt(1.0 / nx as f64 + 1.0 / ny as f64);
        let df = (nx + ny - 2) as f64;
        (0..self.m)
            .map(|i| {
                let row = self.row(i);
                let (mx, ssx) = moments(row, xs);
                let (my, ssy) = moments(row, ys);
                let s2 = (ssx + ssy) / df;
                if !(s2 > 0.0) {
                    return Err(Error::ZeroVariance {
                        feature: self.feature_ids[i].clone(),
                    });
                }
                Ok((my - mx) / (sqrt(s2) * scale))
            })
            .collect()
    }
}

/// Mean and centered sum of squares over the selected columns.
fn moments(row: &[f64], cols: &[usize]) -> (f64, f64) {
    let n = cols.len() as f64;
    let mu = cols.iter().map(|&j| row[j]).sum::<f64>() / n;
    let ss = cols.iter().map(|&j| (row[j] - mu) * (row[j] - mu)).sum();
    (mu, ss)
}

/// `2·(1 - F_t(|t|; df))`.
pub fn two_sided_pvalues(t: &[f64], df: u32) -> Result<Vec<f64>> {
    let f = AlternativeFamily::student(df, 0.0)?;
    Ok(t.iter().map(|&x| (2.0 * f.f0_sf(x.abs())).min(1.0)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResamplingPlan {
    pub rates: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
}

impl ResamplingPlan {
    /// `(⌊s·n_X⌋, ⌊s·n_Y⌋)` for each rate.
    pub fn sizes(&self, n_x: usize, n_y: usize) -> Result<Vec<(usize, usize)>> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter {
                name: "replicates",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        self.rates
            .iter()
            .map(|&s| {
                if !(s > 0.0 && s <= 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "rate",
                        value: s,
                        reason: "must lie in (0, 1]",
                    });
                }
                let sx = floor(s * n_x as f64) as usize;
                let sy = floor(s * n_y as f64) as usize;
                if sx < 2 || sy < 2 {
                    return Err(Error::SubsampleTooSmall { rate: s, n_x: sx, n_y: sy });
                }
                Ok((sx, sy))
            })
            .collect()
    }

    /// Columns kept in replicate `b` at rate index `r`, sorted within each group.
    pub fn subsample(&self, data: &TwoSampleDataset, r: usize, b: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let (sx, sy) = self.sizes(data.n_x(), data.n_y())?[r];
        let mut rng = substream(self.seed, stream_key(r as u32, b as u32));
        let mut pick = |mut cols: Vec<usize>, k: usize| {
            cols.partial_shuffle(&mut rng, k);
            let mut chosen = cols[..k].to_vec();
            chosen.sort_unstable();
            chosen
        };
        let xs = pick(data.columns(Group::X), sx);
        let ys = pick(data.columns(Group::Y), sy);
        Ok((xs, ys))
    }
}

/// BH95 rejection fractions over `alpha_grid` for one resample.
pub fn resample_rho(
    data: &TwoSampleDataset,
    alpha_grid: &[f64],
    plan: &ResamplingPlan,
    r: usize,
    b: usize,
) -> Result<Vec<f64>> {
    let (xs, ys) = plan.subsample(data, r, b)?;
    let t = data.t_statistics_subset(&xs, &ys)?;
    let p = two_sided_pvalues(&t, (xs.len() + ys.len() - 2) as u32)?;
    let sorted = SortedPValues::new(&p)?;
    alpha_grid.iter().map(|&a| Ok(sorted.bh95(a)?.rho)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub rate: f64,
    pub replicate: usize,
    pub alpha: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoteRow {
    pub rate: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub df: u32,
    pub theta: f64,
    pub alpha: f64,
    pub rho_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionCurve {
    pub rows: Vec<CurveRow>,
    pub asymptote: Vec<AsymptoteRow>,
}

/// Effect size and null proportion of the two-sided Student model used for asymptotes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoteSpec {
    pub delta: f64,
    pub pi0: f64,
}

/// `ρ∞(α)` of the two-sided Student mixture at group sizes `(n_x, n_y)`.
pub fn asymptote(spec: AsymptoteSpec, rate: f64, n_x: usize, n_y: usize, alpha_grid: &[f64]) -> Result<Vec<AsymptoteRow>> {
    let eff = EffectSpec::new(spec.delta, n_x, n_y)?;
    let model = MixtureModel::new(spec.pi0, eff.family()?, Sidedness::TwoSided)?;
    let table = CrossingTable::new(&model);
    alpha_grid
        .iter()
        .map(|&alpha| {
            Ok(AsymptoteRow {
                rate,
                n_x,
                n_y,
                df: eff.df(),
                theta: eff.theta(),
                alpha,
                rho_inf: table.predict(alpha)?.rho_inf,
            })
        })
        .collect()
}

/// Assembles per-resample fractions (`rhos[r][b]`, in order) and asymptotes.
pub fn assemble_curve(
    data: &TwoSampleDataset,
    alpha_grid: &[f64],
    plan: &ResamplingPlan,
    spec: AsymptoteSpec,
    rhos: &[Vec<Vec<f64>>],
) -> Result<RejectionCurve> {
    let sizes = plan.sizes(data.n_x(), data.n_y())?;
    let mut rows = Vec::new();
    let mut asym = Vec::new();
    for (r, &rate) in plan.rates.iter().enumerate() {
        for (b, curve) in rhos[r].iter().enumerate() {
            for (&alpha, &rho) in alpha_grid.iter().zip(curve) {
                rows.push(CurveRow {
                    rate,
                    replicate: b,
                    alpha,
                    rho,
                });
            }
        }
        let (sx, sy) = sizes[r];
        asym.extend(asymptote(spec, rate, sx, sy, alpha_grid)?);
    }
    Ok(RejectionCurve {
        rows,
        asymptote: asym,
    })
}

/// Sequential driver.
pub fn rejection_curve(
    data: &TwoSampleDataset,
    alpha_grid: &[f64],
    plan: &ResamplingPlan,
    spec: AsymptoteSpec,
) -> Result<RejectionCurve> {
    plan.sizes(data.n_x(), data.n_y())?;
    let rhos = (0..plan.rates.len())
        .map(|r| {
            (0..plan.replicates)
                .map(|b| resample_rho(data, alpha_grid, plan, r, b))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_curve(data, alpha_grid, plan, spec, &rhos)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub pi0: f64,
    pub delta: f64,
    pub sigma: f64,
    pub seed: u64,
}

/// Gaussian expression matrix: the first `round(π0·m)` features are null,
/// the rest shift group Y by `±δσ` with a random sign. X columns come first.
pub fn synthetic_dataset(spec: SyntheticSpec) -> Result<TwoSampleDataset> {
    let n = spec.n_x + spec.n_y;
    let mut rng = substream(spec.seed, 0);
    let m0 = libm::round(spec.pi0 * spec.m as f64) as usize;
    let mut values = Vec::with_capacity(spec.m * n);
    for i in 0..spec.m {
        let shift = if i < m0 {
            0.0
        } else if rng.random::<bool>() {
            spec.delta * spec.sigma
        } else {
            -spec.delta * spec.sigma
        };
        for j in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            values.push(spec.sigma * z + if j < spec.n_x { 0.0 } else { shift });
        }
    }
    let groups = (0..n).map(|j| if j < spec.n_x { Group::X } else { Group::Y }).collect();
    let ids = (0..spec.m).map(|i| format!("f{i}")).collect();
    TwoSampleDataset::new(values, groups, ids)
}
