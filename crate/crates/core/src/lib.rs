//! Numerical core for studying criticality and π0 estimation in multiple testing.
//!
//! The crate covers the whole chain from test-statistic families to the
//! asymptotic behavior of the Benjamini–Hochberg step-up procedure:
//!
//! * [`distributions`]: null/alternative test-statistic densities, tails,
//!   likelihood ratios and the `Hh_k` repeated Gaussian integral.
//! * [`pvalues`]: one- and two-sided p-value transforms and the p-value
//!   mixture `G = π0·u + (1 − π0)·G1(u)`.
//! * [`criticality`]: critical values `α*`, purity and `π0`-bar.
//! * [`procedures`]: BH95 and plug-in BH95 with ground-truth accounting.
//! * [`pi0`]: Storey and boundary-kernel estimators of the null proportion.
//! * [`asymptotics`]: limits of thresholds, rejection fractions, power and FDP.
//! * [`simulation`] and [`ttest`]: Monte Carlo kernels whose replicates can be
//!   scheduled by any executor without changing the results.
//!
//! Everything is `no_std` (with `alloc`); IO, CLI and thread pools live in the
//! companion `fdrlab` crate.

#![cfg_attr(not(test), no_std)]
// `!(x >= lo)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod criticality;
pub mod distributions;
mod error;
pub mod pi0;
pub mod procedures;
pub mod pvalues;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod simulation;
pub mod special;
pub mod stats;
pub mod ttest;

pub use error::{Error, Result};
