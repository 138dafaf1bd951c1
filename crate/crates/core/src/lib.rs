//! Weak-identification-robust inference for linear IV models with many
//! (possibly more than `n`) instruments.
//!
//! The central object is [`RidgeKernel`]: one thin SVD of the standardised
//! instrument matrix from which every ridge projection `P(gamma)` quantity is
//! read off. On top of it sit the penalty selector, the ridge-regularised
//! jackknifed AR test and its rivals, confidence-set inversion, and a
//! Monte-Carlo harness.
//!
//! The crate is `no_std` and needs only `alloc`; file formats, the command
//! line and threading live in the `rjar` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod artests;
pub mod confset;
pub mod dataio;
mod error;
pub mod kernel;
pub mod montecarlo;
pub mod normal;
pub mod penalty;

pub use artests::{
    cms_ar, ms_ar, rjar, sup_score, CmsTest, MsTest, PreparedTest, RjarTest, Statistic, SupScoreScaling,
    SupScoreTest, TestFlags, TestKind, TestOptions, TestResult, UnregularisedProjection,
};
pub use confset::{invert, ConfidenceSet, Inverter};
pub use dataio::{interact_instruments, partial_and_standardise, structural_residuals, Dataset, PartialledData};
pub use error::{Error, Result};
pub use kernel::{build_kernel, RidgeKernel, RidgeProjection};
pub use penalty::{assumption_diagnostics, select_gamma, Diagnostics, PenaltySelection};
